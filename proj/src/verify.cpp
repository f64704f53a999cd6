#include "refocus/verify.hpp"

#include "refocus/revin.hpp"
#include "refocus/training.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace refocus {

namespace {

Eigen::VectorXd random_signal(Index n, Rng& rng, double offset) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = u(rng) + offset;
  return x;
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

std::vector<CheckResult> verify_revin_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> offset(-5.0, 5.0);
  double dc_std = 0, ratio_std = 0, dc_reduced = 0, ratio_reduced = 0;
  for (Index n : {Index{8}, Index{31}, Index{96}}) {
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = random_signal(n, rng, offset(rng));
      const auto std_rep = verify_revin_theorem(as_span(x), {}, spectral::Convention::Standard);
      dc_std = std::max(dc_std, std_rep.dc_energy / std_rep.max_energy);
      ratio_std = std::max(ratio_std, std_rep.max_ratio_residual);
      const auto reduced_rep = verify_revin_theorem(as_span(x), {}, spectral::Convention::Reduced);
      dc_reduced = std::max(dc_reduced, reduced_rep.dc_energy / reduced_rep.max_energy);
      ratio_reduced = std::max(ratio_reduced, reduced_rep.max_ratio_residual);
    }
  }
  return {
      {"revin.dc_energy_rel (standard)", dc_std, 1e-15, dc_std < 1e-15, true},
      {"revin.sigma2_ratio_residual (standard)", ratio_std, 1e-9, ratio_std < 1e-9, true},
      {"revin.dc_energy_rel (T-1 divisor)", dc_reduced, 1e-15, dc_reduced < 1e-15, false},
      {"revin.sigma2_ratio_residual (T-1 divisor)", ratio_reduced, 1e-9, ratio_reduced < 1e-9, false},
  };
}

std::vector<CheckResult> verify_ameo_suite(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (Index k : {Index{2}, Index{8}, Index{24}})
    for (Index n : {Index{16}, Index{96}})
      for (double beta : {0.1, 0.5, 1.0})
        for (int i = 0; i < 20; ++i) {
          const Eigen::VectorXd x = random_signal(n, rng, 0.5);
          worst = std::max(worst, verify_ameo_theorem(as_span(x), k, beta).max_rel_error);
        }

  const auto g = g_decay_report(25, 96, 1.0, spectral::Convention::Standard);
  const auto gp = g_decay_report(25, 96, 1.0, spectral::Convention::Reduced);
  std::vector<CheckResult> out{
      {"ameo.circular_spectrum_identity", worst, 1e-9, worst < 1e-9, true},
      {"g_decay.g0_error", g.g0_error, 1e-12, g.g0_ok(), true},
      {"g_decay.leading_bins_nonincreasing", g.leading_nonincreasing ? 0.0 : 1.0, 0.0, g.leading_nonincreasing, true},
      {"g_decay.tail_max_abs_g (f>=10)", g.tail_max_abs_g, 0.2, g.tail_ok(), true},
      {"g_decay.mid_minus_low_mean_gain", g.mid_band_mean_gain - g.low_band_mean_gain, 0.0, g.mid_enhanced(), true},
      {"g_decay.mid_minus_low_mean_gain (T-1 divisor)", gp.mid_band_mean_gain - gp.low_band_mean_gain, 0.0,
       gp.mid_enhanced(), false},
  };
  return out;
}

std::vector<CheckResult> verify_ket_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0;
  struct Shape3 {
    Index b, c, t;
  };
  for (const Shape3 s : {Shape3{2, 3, 96}, Shape3{4, 7, 48}}) {
    RowMatrix x(s.b * s.c, s.t), y(s.b * s.c, s.t / 2);
    for (auto& v : x.reshaped()) v = normal(rng);
    for (auto& v : y.reshaped()) v = normal(rng);
    const KetMix mix = ket_mix(x, y, s.c, 1.0, rng);
    worst = std::max(worst, verify_ket_equivalence(x, y, s.c, mix.alpha, mix.perm).max_abs_diff);
  }
  return {{"ket.time_vs_spectral_max_abs_diff", worst, 1e-10, worst < 1e-10, true}};
}

ReFocusConfig gradcheck_config() {
  ReFocusConfig cfg;
  cfg.channels = 2;
  cfg.input_length = 8;
  cfg.horizon = 4;
  cfg.d = 8;
  cfg.q = 8;
  cfg.blocks = 1;
  cfg.kernel = 3;
  cfg.beta = 0.5;
  cfg.strategy = PickStrategy::Max;
  return cfg;
}

ModelGradCheck model_gradient_check(const ReFocusConfig& cfg, std::uint64_t seed, Index batch, double h) {
  Rng rng(seed);
  ReFocusModel model(cfg, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix x(batch * cfg.channels, cfg.input_length), y(batch * cfg.channels, cfg.horizon);
  for (auto& v : x.reshaped()) v = normal(rng);
  for (auto& v : y.reshaped()) v = normal(rng);
  const Tensor xt = Tensor::matrix(x), yt = Tensor::matrix(y);

  Rng pick_rng(seed + 1);
  const auto base = model.forward(xt, cfg.channels, pick_rng, {});
  const std::vector<std::vector<Index>> frozen = base.choices;
  auto loss = [&] {
    ForecastOptions opt;
    opt.forced_choices = frozen;
    Rng r(seed + 1);
    return mse_loss(model.forward(xt, cfg.channels, r, opt).y, yt);
  };
  auto params = model.parameters();
  std::vector<Tensor> tensors;
  for (auto& p : params) tensors.push_back(p.tensor);
  ModelGradCheck out;
  out.max_rel_error = grad_check(loss, tensors, h);
  out.parameters_checked = param_count(params);
  return out;
}

std::vector<CheckResult> verify_grad_suite(std::uint64_t seed) {
  const auto r = model_gradient_check(gradcheck_config(), seed);
  return {{"grad.full_model_max_rel_error", r.max_rel_error, 1e-4, r.max_rel_error < 1e-4, true}};
}

std::vector<CheckResult> verify_scope(std::string_view scope, std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto append = [&out](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
  const bool all = scope == "all";
  if (!all && scope != "revin" && scope != "ameo" && scope != "ket" && scope != "grad")
    throw std::invalid_argument("unknown verify scope '" + std::string(scope) + "'");
  if (all || scope == "revin") append(verify_revin_suite(seed));
  if (all || scope == "ameo") append(verify_ameo_suite(seed));
  if (all || scope == "ket") append(verify_ket_suite(seed));
  if (all || scope == "grad") append(verify_grad_suite(seed));
  return out;
}

bool all_passed(const std::vector<CheckResult>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.asserted || c.passed; });
}

}  // namespace refocus
