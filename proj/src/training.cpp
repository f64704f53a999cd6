#include "refocus/training.hpp"

#include "refocus/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace refocus {

KetSchedule parse_ket_schedule(std::string_view s) {
  if (s == "alternate") return KetSchedule::Alternate;
  if (s == "pseudo_only") return KetSchedule::PseudoOnly;
  if (s == "real_only") return KetSchedule::RealOnly;
  throw std::invalid_argument("unknown KET schedule '" + std::string(s) + "'");
}

std::string_view to_string(KetSchedule s) {
  switch (s) {
    case KetSchedule::Alternate:
      return "alternate";
    case KetSchedule::PseudoOnly:
      return "pseudo_only";
    case KetSchedule::RealOnly:
      return "real_only";
  }
  return "alternate";
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ContractError("TrainConfig: lr must be positive");
  if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be at least 1");
  if (max_epochs < 1) throw ContractError("TrainConfig: max_epochs must be at least 1");
  if (patience < 1) throw ContractError("TrainConfig: patience must be at least 1");
  if (ket.enabled && !(ket.alpha_std > 0)) throw ContractError("TrainConfig: ket.alpha_std must be positive");
}

namespace {

void check_mix_shapes(const Eigen::Ref<const RowMatrix>& x, Index channels, const Eigen::Ref<const RowMatrix>& alpha,
                      std::span<const Index> perm) {
  if (channels < 1 || x.rows() % channels != 0) throw DimensionError("ket: rows must be a multiple of C");
  const Index batch = x.rows() / channels;
  if (alpha.rows() != batch || alpha.cols() != channels) throw DimensionError("ket: alpha must be B x C");
  if (static_cast<Index>(perm.size()) != batch * channels) throw DimensionError("ket: perm must be B x C");
  for (Index p : perm)
    if (p < 0 || p >= channels) throw ContractError("ket: permutation entry out of range");
}

}  // namespace

RowMatrix ket_apply(const Eigen::Ref<const RowMatrix>& x, Index channels, const Eigen::Ref<const RowMatrix>& alpha,
                    std::span<const Index> perm) {
  check_mix_shapes(x, channels, alpha, perm);
  RowMatrix out = x;
  const Index batch = x.rows() / channels;
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < channels; ++c)
      out.row(b * channels + c) += alpha(b, c) * x.row(b * channels + perm[b * channels + c]);
  return out;
}

RowMatrix ket_apply_spectral(const Eigen::Ref<const RowMatrix>& x, Index channels,
                             const Eigen::Ref<const RowMatrix>& alpha, std::span<const Index> perm) {
  check_mix_shapes(x, channels, alpha, perm);
  const Index n = x.cols();
  std::vector<spectral::ComplexSpectrum<double>> spectra;
  spectra.reserve(static_cast<std::size_t>(x.rows()));
  for (Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd row = x.row(r).transpose();
    spectra.push_back(spectral::rfft<double>(row));
  }
  RowMatrix out(x.rows(), n);
  const Index batch = x.rows() / channels;
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < channels; ++c) {
      const auto& own = spectra[b * channels + c];
      const auto& other = spectra[b * channels + perm[b * channels + c]];
      spectral::ComplexSpectrum<double> mixed;
      mixed.n_time = n;
      mixed.re = own.re + alpha(b, c) * other.re;
      mixed.im = own.im + alpha(b, c) * other.im;
      out.row(b * channels + c) = spectral::irfft(mixed, n).transpose();
    }
  }
  return out;
}

KetMix ket_mix(const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const RowMatrix>& y, Index channels,
               double alpha_std, Rng& rng) {
  if (x.rows() != y.rows()) throw DimensionError("ket_mix: X and Y row counts differ");
  if (channels < 1 || x.rows() % channels != 0) throw DimensionError("ket_mix: rows must be a multiple of C");
  const Index batch = x.rows() / channels;
  KetMix mix;
  mix.alpha.resize(batch, channels);
  mix.perm.resize(static_cast<std::size_t>(batch * channels));
  std::normal_distribution<double> normal(0.0, alpha_std);
  for (Index b = 0; b < batch; ++b) {
    auto first = mix.perm.begin() + b * channels;
    std::iota(first, first + channels, Index{0});
    std::shuffle(first, first + channels, rng);
    for (Index c = 0; c < channels; ++c) mix.alpha(b, c) = normal(rng);
  }
  mix.x = ket_apply(x, channels, mix.alpha, mix.perm);
  mix.y = ket_apply(y, channels, mix.alpha, mix.perm);
  return mix;
}

KetEquivalenceReport verify_ket_equivalence(const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const RowMatrix>& y,
                                            Index channels, const Eigen::Ref<const RowMatrix>& alpha,
                                            std::span<const Index> perm, double tol) {
  KetEquivalenceReport r;
  const double dx = (ket_apply(x, channels, alpha, perm) - ket_apply_spectral(x, channels, alpha, perm)).cwiseAbs().maxCoeff();
  const double dy = (ket_apply(y, channels, alpha, perm) - ket_apply_spectral(y, channels, alpha, perm)).cwiseAbs().maxCoeff();
  r.max_abs_diff = std::max(dx, dy);
  r.passed = r.max_abs_diff < tol;
  return r;
}

AdamState AdamState::for_parameters(const ParameterList& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& p : params) {
    s.m.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
    s.v.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
  }
  return s;
}

void adam_step(const ParameterList& params, AdamState& state) {
  if (params.size() != state.m.size()) throw DimensionError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.has_grad() && !params[i].tensor.grad().allFinite())
      throw ContractError("adam_step: non-finite gradient for parameter '" + params[i].name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    if (!p.has_grad()) continue;
    const Eigen::VectorXd& g = p.grad();
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseAbs2();
    const Eigen::ArrayXd m_hat = state.m[i].array() / c1;
    const Eigen::ArrayXd v_hat = state.v[i].array() / c2;
    p.mutable_data().array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

Batch assemble_batch(const WindowSet& set, std::span<const Index> members) {
  const Index c = set.channels();
  Batch b;
  b.x.resize(static_cast<Index>(members.size()) * c, set.input_length);
  b.y.resize(static_cast<Index>(members.size()) * c, set.horizon);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const Index o = set.origins[members[i]];
    b.x.middleRows(static_cast<Index>(i) * c, c) = set.values->middleCols(o, set.input_length);
    b.y.middleRows(static_cast<Index>(i) * c, c) = set.values->middleCols(o + set.input_length, set.horizon);
  }
  return b;
}

Metrics evaluate(const Forecaster& model, const WindowSet& set, Rng& rng, Index batch_size) {
  if (set.size() == 0) throw ContractError("evaluate: no windows");
  double se = 0, ae = 0;
  Index count = 0;
  std::vector<Index> members;
  for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch_size)) {
    members.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch_size)); ++i)
      members.push_back(static_cast<Index>(i));
    const Batch b = assemble_batch(set, members);
    const auto f = model.forward(Tensor::matrix(b.x), set.channels(), rng, {});
    const RowMatrix diff = f.y.as_matrix() - b.y;
    se += diff.array().square().sum();
    ae += diff.array().abs().sum();
    count += diff.size();
  }
  return {se / double(count), ae / double(count)};
}

TrainResult train(Forecaster& model, const WindowSet& train_set, const WindowSet& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() == 0) throw ContractError("train: empty training split");
  if (val_set.size() == 0) throw ContractError("train: empty validation split");

  const ParameterList params = model.parameters();
  AdamState adam = AdamState::for_parameters(params, cfg.lr);
  Rng shuffle_rng(cfg.seed);
  Rng ket_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng forward_rng(cfg.seed ^ 0xc2b2ae3d27d4eb4fULL);
  const bool use_ket = cfg.ket.enabled && cfg.ket.schedule != KetSchedule::RealOnly;
  const Index channels = train_set.channels();

  TrainResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  std::vector<Index> order(train_set.size());
  std::iota(order.begin(), order.end(), Index{0});
  Index stale = 0;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    Index n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Batch batch = assemble_batch(train_set, std::span<const Index>(order.data() + start, end - start));
      const bool pseudo =
          use_ket && (cfg.ket.schedule == KetSchedule::PseudoOnly || (n_batches % 2 == 1));

      KetMix mix;
      if (pseudo) mix = ket_mix(batch.x, batch.y, channels, cfg.ket.alpha_std, ket_rng);
      const RowMatrix& inputs = pseudo ? mix.x : batch.x;
      const RowMatrix& targets = pseudo ? mix.y : batch.y;
      if (hooks.on_batch) hooks.on_batch({epoch, n_batches, pseudo, batch, inputs, targets});

      ForecastOptions opt;
      opt.training = true;
      const auto f = model.forward(Tensor::matrix(inputs), channels, forward_rng, opt);
      const Tensor loss = mse_loss(f.y, Tensor::matrix(targets));
      backward(loss);
      adam_step(params, adam);
      for (const auto& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
      }
      loss_sum += loss.item();
      ++n_batches;
    }

    Rng eval_rng(cfg.seed ^ 0x165667b19e3779f9ULL);
    const Metrics val = evaluate(model, val_set, eval_rng);
    result.history.push_back({epoch, loss_sum / double(n_batches), val.mse, val.mae});
    if (val.mse < result.best_val_mse) {
      result.best_val_mse = val.mse;
      result.best_epoch = epoch;
      result.best_parameters = snapshot_parameters(params);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  restore_parameters(params, result.best_parameters);
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_mse,val_mae\r\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%td,%.17g,%.17g,%.17g\r\n", static_cast<std::ptrdiff_t>(h.epoch), h.train_loss,
                  h.val_mse, h.val_mae);
    os << buf;
  }
  return os.str();
}

}  // namespace refocus
