// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only N   run criterion N (exit 77 when it is skipped)

#include "refocus/ameo.hpp"
#include "refocus/baselines.hpp"
#include "refocus/cli.hpp"
#include "refocus/data.hpp"
#include "refocus/ekpb.hpp"
#include "refocus/model.hpp"
#include "refocus/revin.hpp"
#include "refocus/spectral.hpp"
#include "refocus/training.hpp"
#include "refocus/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace refocus;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Fail;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Eigen::VectorXd uniform_signal(Index n, Rng& rng, double offset) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = u(rng) + offset;
  return x;
}

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 1 ------------------------------------------------------------------------
Outcome revin_spectrum() {
  Rng rng(101);
  std::uniform_real_distribution<double> offset(-5.0, 5.0);
  double worst_dc = 0, worst_ratio = 0;
  for (Index n : {Index{8}, Index{31}, Index{96}})
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = uniform_signal(n, rng, offset(rng));
      const auto rep = verify_revin_theorem(view(x), {}, spectral::Convention::Standard);
      worst_dc = std::max(worst_dc, rep.dc_energy / rep.max_energy);
      worst_ratio = std::max(worst_ratio, rep.max_ratio_residual);
    }
  const bool ok = worst_dc < 1e-15 && worst_ratio < 1e-9;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("E(0)/max E = %.3g (< 1e-15), max |sigma^2 E_norm/E - 1| = %.3g (< 1e-9)", worst_dc, worst_ratio)};
}

// 2 ------------------------------------------------------------------------
Outcome ameo_spectrum() {
  Rng rng(102);
  double worst = 0;
  Index bins = 0;
  for (Index k : {Index{2}, Index{8}, Index{24}})
    for (Index n : {Index{16}, Index{96}})
      for (double beta : {0.1, 0.5, 1.0})
        for (int i = 0; i < 20; ++i) {
          const Eigen::VectorXd x = uniform_signal(n, rng, 0.3);
          const auto rep = verify_ameo_theorem(view(x), k, beta);
          worst = std::max(worst, rep.max_rel_error);
          bins += rep.bins_checked;
        }
  return {worst < 1e-9 ? Verdict::Pass : Verdict::Fail,
          fmt("max relative residual %.3g over %td bins (< 1e-9)", worst, static_cast<std::ptrdiff_t>(bins))};
}

// 3 ------------------------------------------------------------------------
Outcome g_decay() {
  const auto rep = g_decay_report(25, 96, 1.0, spectral::Convention::Standard);
  const bool ok = rep.g0_ok() && rep.leading_nonincreasing && rep.tail_ok() && rep.mid_enhanced();
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("|G(0)-1| = %.2g, |G| non-increasing on f=0..5: %s, max |G(f>=10)| = %.4f (< 0.2), "
              "mean |1-G|^2 mid = %.4f vs low = %.4f (need mid > low)",
              rep.g0_error, rep.leading_nonincreasing ? "yes" : "no", rep.tail_max_abs_g, rep.mid_band_mean_gain,
              rep.low_band_mean_gain)};
}

// 4 ------------------------------------------------------------------------
Outcome ket_equivalence() {
  Rng rng(104);
  std::normal_distribution<double> normal;
  double worst = 0;
  struct S {
    Index b, c, t;
  };
  for (const S s : {S{2, 3, 96}, S{4, 7, 48}})
    for (int rep = 0; rep < 5; ++rep) {
      RowMatrix x(s.b * s.c, s.t), y(s.b * s.c, s.t);
      for (auto& v : x.reshaped()) v = normal(rng);
      for (auto& v : y.reshaped()) v = normal(rng);
      const KetMix mix = ket_mix(x, y, s.c, 1.0, rng);
      worst = std::max(worst, verify_ket_equivalence(x, y, s.c, mix.alpha, mix.perm).max_abs_diff);
    }
  return {worst < 1e-10 ? Verdict::Pass : Verdict::Fail, fmt("max |time mix - spectral mix| = %.3g (< 1e-10)", worst)};
}

// 5 ------------------------------------------------------------------------
Outcome filter_mid_gap() {
  Rng rng(105);
  const Index n = 96;
  const auto b = spectral::bands(n);
  double worst_mid = 0;
  bool decreased = true;
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = uniform_signal(n, rng, 0.0);
    const double before = spectral::mid_gap_metric(x);
    const std::vector<Eigen::VectorXd> outputs = {
        spectral::ideal_filter(view(x), 0, b.mid_begin - 1, spectral::FilterKind::Low),
        spectral::ideal_filter(view(x), b.mid_end, n / 2, spectral::FilterKind::High),
        spectral::band_stop(view(x), b.mid_begin - 1, b.mid_end),
    };
    for (const auto& y : outputs) {
      const Eigen::VectorXd e = spectral::energy(spectral::rfft(y));
      worst_mid = std::max(worst_mid, e.segment(b.mid_begin, b.mid_end - b.mid_begin).maxCoeff());
      decreased = decreased && spectral::mid_gap_metric(y) < before;
    }
  }
  const bool ok = worst_mid < 1e-18 && decreased;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("max mid-band output energy %.3g (< 1e-18), mid_gap_metric strictly decreased: %s", worst_mid,
              decreased ? "yes" : "no")};
}

// 6 ------------------------------------------------------------------------
Outcome gradient_integrity() {
  const auto r = model_gradient_check(gradcheck_config(), 106);
  return {r.max_rel_error < 1e-4 ? Verdict::Pass : Verdict::Fail,
          fmt("max relative error %.3g over %td parameters (< 1e-4)", r.max_rel_error,
              static_cast<std::ptrdiff_t>(r.parameters_checked))};
}

// 7 ------------------------------------------------------------------------
Outcome key_frequency_recovery() {
  Rng rng(107);
  const Index c = 4, n = 96, key = 5;
  const auto data = synth_shared_key(c, n, key, {1, 2}, 10.0, rng);
  RowMatrix re(c, n / 2 + 1), im(c, n / 2 + 1);
  for (Index ch = 0; ch < c; ++ch) {
    const auto s = spectral::rfft(Eigen::VectorXd(data.dataset.values.row(ch).transpose()));
    re.row(ch) = s.re.transpose();
    im.row(ch) = s.im.transpose();
  }
  const RowMatrix energies = re.cwiseAbs2() + im.cwiseAbs2();
  const RowMatrix probs = cross_channel_softmax(energies);
  const double carrier_mass = probs(1, key) + probs(2, key);
  const auto mx = pick_key_frequency(re, im, probs, PickStrategy::Max, rng);
  const Index chosen = mx.trace.chosen_channel[std::size_t(key)];
  const bool max_ok = chosen == 1 || chosen == 2;

  RowMatrix counts = RowMatrix::Zero(c, n / 2 + 1);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto k = pick_key_frequency(re, im, probs, PickStrategy::Softmax, rng);
    for (Index j = 0; j <= n / 2; ++j) counts(k.trace.chosen_channel[std::size_t(j)], j) += 1.0;
  }
  const double mc_err = (counts / double(draws) - probs).cwiseAbs().maxCoeff();
  const bool ok = carrier_mass > 0.9 && max_ok && mc_err < 0.01;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("carrier probability at key bin %.6f (> 0.9), max picks channel %td (carrier: %s), "
              "max |MC freq - softmax| = %.4f over 1e5 draws (< 0.01)",
              carrier_mass, static_cast<std::ptrdiff_t>(chosen), max_ok ? "yes" : "no", mc_err)};
}

// 8 ------------------------------------------------------------------------
// Small noisy task so that every variant converges and the comparison is
// about generalization. Seeds are fixed; do not pick them by outcome.
struct AblationRun {
  bool ameo;
  bool ket;
  KetSchedule schedule;
  const char* label;
};

Outcome ablation_ordering() {
  ForecastTaskSpec spec;
  spec.channels = 6;
  spec.length = 500;
  spec.slow_amplitude = 3.0;
  spec.slow_period = 400;
  spec.shared = {{8.0, 0.6, {0, 1, 2, 3}}, {6.0, 0.5, {2, 3, 4, 5}}, {12.0, 0.5, {0, 4, 5}}};
  spec.noise_std = 0.8;
  const Index t_in = 96, horizon = 48;

  const std::vector<AblationRun> runs = {
      {true, true, KetSchedule::Alternate, "AMEO+KET"},
      {false, true, KetSchedule::Alternate, "KET only"},
      {false, false, KetSchedule::Alternate, "neither"},
      {true, true, KetSchedule::PseudoOnly, "AMEO+KET pseudo_only"},
  };
  std::vector<std::vector<double>> mse(runs.size());
  for (std::uint64_t seed : {std::uint64_t{801}, std::uint64_t{802}, std::uint64_t{803}}) {
    Rng data_rng(seed);
    const Dataset raw = synth_forecast_task(spec, data_rng);
    const SplitSpec split = chronological_split(raw.length(), {0.7, 0.1, 0.2}, t_in);
    const RowMatrix values = standardize(raw, split).first.values;
    auto make = [&](const Segment& s) {
      WindowSet w;
      w.values = &values;
      w.origins = window_origins(s, t_in, horizon);
      w.input_length = t_in;
      w.horizon = horizon;
      return w;
    };
    const WindowSet train_set = make(split.train), val_set = make(split.val);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      ReFocusConfig mc;
      mc.channels = spec.channels;
      mc.input_length = t_in;
      mc.horizon = horizon;
      mc.d = 64;
      mc.q = 32;
      mc.blocks = 1;
      mc.kernel = 25;
      mc.beta = 0.5;
      mc.use_ameo = runs[r].ameo;
      Rng init(seed + 1000);
      ReFocusModel model(mc, init);
      TrainConfig tc;
      tc.lr = 5e-3;
      tc.batch_size = 32;
      tc.max_epochs = 80;
      tc.patience = 10;
      tc.seed = seed;
      tc.ket.enabled = runs[r].ket;
      tc.ket.schedule = runs[r].schedule;
      tc.ket.alpha_std = 1.0;
      mse[r].push_back(train(model, train_set, val_set, tc).best_val_mse);
    }
  }
  std::vector<double> med;
  std::ostringstream detail;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    med.push_back(median3(mse[r]));
    detail << runs[r].label << " " << fmt("%.5f", med.back()) << " [";
    for (std::size_t s = 0; s < mse[r].size(); ++s) detail << (s ? " " : "") << fmt("%.5f", mse[r][s]);
    detail << "]; ";
  }
  const bool ok = med[0] <= med[1] && med[1] <= med[2] && med[0] <= med[3];
  detail << "need AMEO+KET <= KET only <= neither and alternate <= pseudo_only (3-seed medians)";
  return {ok ? Verdict::Pass : Verdict::Fail, detail.str()};
}

// 9 ------------------------------------------------------------------------
fs::path etth1_path() {
  if (const char* env = std::getenv("REFOCUS_ETTH1"); env && *env) return env;
  return fs::path(REFOCUS_SOURCE_DIR) / "data" / "ETTh1.csv";
}

Outcome etth1_smoke() {
  const fs::path path = etth1_path();
  if (!fs::exists(path))
    return {Verdict::Skip, "ETTh1.csv not found at " + path.string() + " (set REFOCUS_ETTH1 to the file)"};
  cli::ExperimentConfig cfg;
  cfg.dataset = path.string();
  cfg.model.input_length = 96;
  cfg.model.horizon = 96;
  cfg.model.d = 128;
  cfg.model.q = 64;
  cfg.model.blocks = 2;
  cfg.model.kernel = 25;
  cfg.model.beta = 0.5;
  cfg.train.lr = 1e-4;
  cfg.train.batch_size = 32;
  cfg.train.max_epochs = 20;
  auto data = cli::prepare_data(cfg);

  Rng rng(cfg.model.seed);
  ReFocusModel model(cfg.model, rng);
  train(model, data->train, data->val, cfg.train);
  LinearForecaster linear(96, 96, rng);
  train(linear, data->train, data->val, cfg.train);
  Rng e1(1), e2(1), e3(1);
  const double m_refocus = evaluate(model, data->test, e1).mse;
  const double m_linear = evaluate(linear, data->test, e2).mse;
  const double m_persist = evaluate(PersistenceForecaster(96, 96), data->test, e3).mse;
  const bool ok = m_refocus < 0.55 && m_refocus < m_linear && m_refocus < m_persist;
  return {ok ? Verdict::Pass : Verdict::Fail,
          fmt("test MSE refocus %.4f (< 0.55), linear %.4f, persistence %.4f", m_refocus, m_linear, m_persist)};
}

// 10 -----------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "refocus_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "toy.json") << R"({
      "synth": {"channels": 3, "length": 500, "shared": [{"period": 10, "amplitude": 0.6, "channels": [0, 2]}]},
      "T": 32, "F": 16, "D": 16, "Q": 8, "K": 9, "lr": 1e-3, "batch_size": 16, "max_epochs": 2, "seed": 9,
      "ket": {"enabled": true}})";
  }
  const std::string cfg = (root / "toy.json").string();
  struct Cmd {
    std::vector<std::string> args;
    std::vector<std::string> files;  // artifacts relative to the run dir
  };
  auto commands = [&](const fs::path& dir) {
    const std::string d = dir.string();
    return std::vector<Cmd>{
        {{"train", "--config", cfg, "--out", d + "/train"}, {"train/metrics.json", "train/history.csv", "train/checkpoint.json"}},
        {{"eval", "--config", cfg, "--checkpoint", d + "/train/checkpoint.json", "--split", "val"}, {}},
        {{"synth", "--kind", "mid_gap", "--seed", "4", "--out", d + "/synth"}, {"synth/synth.csv"}},
        {{"spectrum", "--input", d + "/synth/synth.csv", "--transform", "ameo", "--out", d + "/spec"},
         {"spec/spectrum.csv", "spec/spectrum.json"}},
        {{"verify", "all", "--format", "json"}, {}},
        {{"gradcheck", "--format", "json"}, {}},
    };
  };
  std::vector<std::string> outputs[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = root / ("run" + std::to_string(rep));
    for (const auto& c : commands(dir)) {
      std::vector<std::string> argv{"refocus"};
      argv.insert(argv.end(), c.args.begin(), c.args.end());
      std::ostringstream out, err;
      const int code = cli::run(argv, out, err);
      outputs[rep].push_back(c.args.front() + " exit " + std::to_string(code) + "\n" + out.str());
      for (const auto& f : c.files) outputs[rep].push_back(slurp(dir / f));
    }
  }
  // Artifacts embed their own directory only in stdout of train; strip it by
  // comparing run0 and run1 files directly and stdout after path rewrite.
  int mismatches = 0;
  for (std::size_t i = 0; i < outputs[0].size(); ++i) {
    std::string a = outputs[0][i], b = outputs[1][i];
    for (auto* s : {&a, &b})
      for (const char* tag : {"run0", "run1"})
        for (std::size_t p; (p = s->find(tag)) != std::string::npos;) s->replace(p, 4, "runX");
    if (a != b) ++mismatches;
  }
  fs::remove_all(root);
  return {mismatches == 0 ? Verdict::Pass : Verdict::Fail,
          fmt("%zu outputs compared byte for byte across two runs, %d mismatches", outputs[0].size(), mismatches)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "revin spectrum", 5, revin_spectrum},
      {2, "ameo spectrum", 10, ameo_spectrum},
      {3, "g(f) decay", 1, g_decay},
      {4, "ket equivalence", 2, ket_equivalence},
      {5, "filter mid gap", 2, filter_mid_gap},
      {6, "gradient integrity", 60, gradient_integrity},
      {7, "key-frequency recovery", 30, key_frequency_recovery},
      {8, "ablation ordering", 900, ablation_ordering},
      {9, "etth1 smoke", 2700, etth1_smoke},
      {10, "determinism", 120, determinism},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }
  int failed = 0, skipped = 0, ran = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict != Verdict::Skip && secs > c.budget_s) {
      o.verdict = Verdict::Fail;
      o.detail += fmt("; runtime %.1f s exceeds %.0f s", secs, c.budget_s);
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
    std::cout << "[" << tag << "] " << c.id << " " << c.name << ": " << o.detail << fmt(" (%.2f s)", secs) << std::endl;
    if (o.verdict == Verdict::Fail) ++failed;
    if (o.verdict == Verdict::Skip) ++skipped;
  }
  if (ran == 0) {
    std::cerr << "no criterion " << only << "\n";
    return 2;
  }
  if (failed) return 1;
  if (skipped == ran) return 77;
  return 0;
}
