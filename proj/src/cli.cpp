#include "refocus/cli.hpp"

#include "refocus/baselines.hpp"
#include "refocus/revin.hpp"
#include "refocus/spectral.hpp"
#include "refocus/verify.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace refocus::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const std::set<std::string> kModelKeys = {"C", "T", "F", "D", "Q", "N", "K", "beta", "strategy", "eps",
                                          "ameo", "head", "activation", "eval_argmax"};

ForecastTaskSpec parse_task(const json& j, std::optional<std::uint64_t>& seed) {
  ForecastTaskSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "channels") spec.channels = value.get<Index>();
    else if (key == "length") spec.length = value.get<Index>();
    else if (key == "slow_amplitude") spec.slow_amplitude = value.get<double>();
    else if (key == "slow_period") spec.slow_period = value.get<double>();
    else if (key == "noise_std") spec.noise_std = value.get<double>();
    else if (key == "seed") seed = value.get<std::uint64_t>();
    else if (key == "shared") {
      for (const auto& s : value) {
        ForecastTaskSpec::Shared shared;
        for (const auto& [k, v] : s.items()) {
          if (k == "period") shared.period = v.get<double>();
          else if (k == "amplitude") shared.amplitude = v.get<double>();
          else if (k == "channels") shared.channels = v.get<std::vector<Index>>();
          else throw ConfigError("unknown key 'synth.shared." + k + "'");
        }
        spec.shared.push_back(std::move(shared));
      }
    } else {
      throw ConfigError("unknown key 'synth." + key + "'");
    }
  }
  if (spec.channels < 1 || spec.length < 2) throw ConfigError("synth: need channels >= 1 and length >= 2");
  return spec;
}

KetConfig parse_ket(const json& j) {
  KetConfig ket;
  for (const auto& [key, value] : j.items()) {
    if (key == "enabled") ket.enabled = value.get<bool>();
    else if (key == "alpha_std") ket.alpha_std = value.get<double>();
    else if (key == "schedule") ket.schedule = parse_ket_schedule(value.get<std::string>());
    else throw ConfigError("unknown key 'ket." + key + "'");
  }
  return ket;
}

std::array<double, 3> default_split(const std::string& dataset) {
  if (fs::path(dataset).filename().string().starts_with("ETT")) return {0.6, 0.2, 0.2};
  return {0.7, 0.1, 0.2};
}

std::uint64_t parse_seed(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError(std::string(what) + ": not a seed '" + s + "'");
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Command line --------------------------------------------------------------

struct Args {
  std::string command;
  std::vector<std::string> positional;
  std::map<std::string, std::string> flags;

  bool has(const std::string& k) const { return flags.count(k) != 0; }
  std::string get(const std::string& k, const std::string& fallback = "") const {
    auto it = flags.find(k);
    return it == flags.end() ? fallback : it->second;
  }
  double get_double(const std::string& k, double fallback) const {
    if (!has(k)) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(flags.at(k), &used);
      if (used != flags.at(k).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("--" + k + ": not a number '" + flags.at(k) + "'");
    }
  }
  Index get_index(const std::string& k, Index fallback) const {
    if (!has(k)) return fallback;
    Index v = 0;
    const std::string& s = flags.at(k);
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) throw ConfigError("--" + k + ": not an integer '" + s + "'");
    return v;
  }
};

std::optional<std::uint64_t> seed_override(const Args& a) {
  if (a.has("seed")) return parse_seed(a.get("seed"), "--seed");
  if (const char* env = std::getenv("REFOCUS_SEED"); env && *env) return parse_seed(env, "REFOCUS_SEED");
  return std::nullopt;
}

std::string format_of(const Args& a, const std::string& fallback) {
  const std::string f = a.get("format", fallback);
  if (f != "csv" && f != "json" && f != "table") throw ConfigError("--format must be csv or json, got '" + f + "'");
  return f;
}

json metrics_json(const Metrics& m) { return {{"mse", m.mse}, {"mae", m.mae}}; }

// Commands ------------------------------------------------------------------

ExperimentConfig experiment_from_args(const Args& a) {
  if (!a.has("config")) throw ConfigError("--config PATH is required");
  ExperimentConfig cfg = load_experiment_config(a.get("config"));
  if (auto s = seed_override(a)) apply_seed(cfg, *s);
  if (a.has("out")) cfg.out = a.get("out");
  if (a.has("format")) cfg.format = format_of(a, cfg.format);
  return cfg;
}

int cmd_train(const Args& a, std::ostream& out) {
  ExperimentConfig cfg = experiment_from_args(a);
  auto data = prepare_data(cfg);
  auto model = build_model(cfg);

  TrainResult result;
  if (cfg.model_kind != "persistence") result = train(*model, data->train, data->val, cfg.train, {});

  // Evaluation draws from its own stream so the reported numbers do not
  // depend on how many batches training consumed.
  Rng val_rng(cfg.train.seed ^ 0xe7a1u), test_rng(cfg.train.seed ^ 0xe7a1u), base_rng(0);
  const Metrics val = evaluate(*model, data->val, val_rng);
  const Metrics test = evaluate(*model, data->test, test_rng);
  const PersistenceForecaster persistence(cfg.model.input_length, cfg.model.horizon);
  const Metrics base = evaluate(persistence, data->test, base_rng);

  json metrics = {{"model", model->kind()},
                  {"dataset", data->data.name},
                  {"seed", cfg.train.seed},
                  {"parameters", param_count(*model)},
                  {"epochs_run", result.history.size()},
                  {"best_epoch", result.best_epoch},
                  {"val", metrics_json(val)},
                  {"test", metrics_json(test)},
                  {"persistence_test", metrics_json(base)}};

  const fs::path dir(cfg.out);
  ensure_dir(dir);
  try {
    save_checkpoint(*model, (dir / "checkpoint.json").string());
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  write_text(dir / "history.csv", history_csv(result.history));
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  if (cfg.format == "csv")
    out << "split,mse,mae\r\nval," << num(val.mse) << ',' << num(val.mae) << "\r\ntest," << num(test.mse) << ','
        << num(test.mae) << "\r\n";
  else
    out << metrics.dump(2) << "\n";
  return kOk;
}

int cmd_eval(const Args& a, std::ostream& out) {
  ExperimentConfig cfg = experiment_from_args(a);
  const std::string split = a.get("split", "test");
  if (split != "train" && split != "val" && split != "test")
    throw ConfigError("--split must be train, val or test, got '" + split + "'");

  std::unique_ptr<Forecaster> model;
  if (a.has("baseline")) {
    if (a.get("baseline") != "persistence") throw ConfigError("--baseline must be persistence");
    if (a.has("checkpoint")) throw ConfigError("--baseline and --checkpoint are exclusive");
    model = std::make_unique<PersistenceForecaster>(cfg.model.input_length, cfg.model.horizon);
  } else {
    const std::string path = a.get("checkpoint", (fs::path(cfg.out) / "checkpoint.json").string());
    try {
      model = load_checkpoint(path);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("cannot parse checkpoint " + path + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
    cfg.model.input_length = model->input_length();
    cfg.model.horizon = model->horizon();
  }
  auto data = prepare_data(cfg);
  Rng rng(cfg.train.seed ^ 0xe7a1u);
  const Metrics m = evaluate(*model, data->set(split), rng);
  if (cfg.format == "csv") {
    out << "split,mse,mae,windows\r\n"
        << split << ',' << num(m.mse) << ',' << num(m.mae) << ',' << data->set(split).size() << "\r\n";
  } else {
    const json j = {{"model", model->kind()}, {"split", split}, {"windows", data->set(split).size()},
                    {"mse", m.mse}, {"mae", m.mae}};
    out << j.dump(2) << "\n";
  }
  return kOk;
}

int cmd_verify(const Args& a, std::ostream& out) {
  if (a.positional.size() > 1) throw ConfigError("verify takes a single scope");
  const std::string scope = a.positional.empty() ? "all" : a.positional.front();
  const std::uint64_t seed = seed_override(a).value_or(2024);
  std::vector<CheckResult> checks;
  try {
    checks = verify_scope(scope, seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string format = format_of(a, "table");
  if (format == "json") {
    json rows = json::array();
    for (const auto& c : checks)
      rows.push_back({{"check", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"asserted", c.asserted},
                      {"passed", c.passed}});
    out << json{{"scope", scope}, {"seed", seed}, {"passed", all_passed(checks)}, {"checks", rows}}.dump(2) << "\n";
  } else if (format == "csv") {
    out << "check,value,tolerance,asserted,passed\r\n";
    for (const auto& c : checks)
      out << '"' << c.name << "\"," << num(c.value) << ',' << num(c.tolerance) << ',' << (c.asserted ? 1 : 0) << ','
          << (c.passed ? 1 : 0) << "\r\n";
  } else {
    out << std::left << std::setw(48) << "check" << std::setw(16) << "value" << std::setw(12) << "tolerance"
        << "result\n";
    for (const auto& c : checks) {
      std::ostringstream v, t;
      v << std::setprecision(6) << c.value;
      t << std::setprecision(3) << c.tolerance;
      const char* verdict = c.passed ? "PASS" : (c.asserted ? "FAIL" : "fail (info)");
      out << std::left << std::setw(48) << c.name << std::setw(16) << v.str() << std::setw(12) << t.str() << verdict
          << "\n";
    }
    out << (all_passed(checks) ? "verify " + scope + ": PASS\n" : "verify " + scope + ": FAIL\n");
  }
  return all_passed(checks) ? kOk : kFailure;
}

int cmd_spectrum(const Args& a, std::ostream& out) {
  if (!a.has("input")) throw ConfigError("--input CSV is required");
  const std::string transform = a.get("transform", "none");
  static const std::set<std::string> kTransforms = {"none", "revin", "ameo", "lowpass", "highpass"};
  if (!kTransforms.count(transform)) throw ConfigError("unknown transform '" + transform + "'");

  const Dataset ds = load_csv(a.get("input"));
  const Index n = ds.length();
  if (n < 8) throw ConfigError("spectrum needs at least 8 time steps");
  const spectral::Bands b = spectral::bands(n);
  const Index f_lo = a.get_index("f-lo", b.mid_end);
  const Index f_hi = a.get_index("f-hi", b.mid_begin - 1);
  const Index kernel = a.get_index("K", 25);
  const double beta = a.get_double("beta", 0.5);

  RowMatrix after;
  try {
    if (transform == "none") {
      after = ds.values;
    } else if (transform == "revin") {
      after = revin_normalize(ds.values).first;
    } else if (transform == "ameo") {
      after = ameo_forward(Tensor::matrix(ds.values), AmeoLayer::init(kernel, beta)).as_matrix();
    } else {
      after.resize(ds.channels(), n);
      const auto kind = transform == "lowpass" ? spectral::FilterKind::Low : spectral::FilterKind::High;
      for (Index c = 0; c < ds.channels(); ++c) {
        const Eigen::VectorXd row = ds.values.row(c).transpose();
        after.row(c) = spectral::ideal_filter<double>({row.data(), static_cast<std::size_t>(n)},
                                                      kind == spectral::FilterKind::Low ? 0 : f_lo,
                                                      kind == spectral::FilterKind::Low ? f_hi : n / 2, kind)
                           .transpose();
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  std::ostringstream csv;
  csv << "channel,f,energy_before,energy_after,mid_gap_before,mid_gap_after\r\n";
  json channels = json::array();
  for (Index c = 0; c < ds.channels(); ++c) {
    const Eigen::VectorXd x = ds.values.row(c).transpose();
    const Eigen::VectorXd y = after.row(c).transpose();
    const Eigen::VectorXd eb = spectral::energy(spectral::rfft(x));
    const Eigen::VectorXd ea = spectral::energy(spectral::rfft(y));
    const double gb = spectral::mid_gap_metric(x), ga = spectral::mid_gap_metric(y);
    const std::string& name = ds.channel_names[static_cast<std::size_t>(c)];
    for (Index f = 0; f < eb.size(); ++f)
      csv << '"' << name << "\"," << f << ',' << num(eb[f]) << ',' << num(ea[f]) << ',' << num(gb) << ',' << num(ga)
          << "\r\n";
    channels.push_back({{"channel", name},
                        {"mid_gap_before", gb},
                        {"mid_gap_after", ga},
                        {"energy_before", std::vector<double>(eb.begin(), eb.end())},
                        {"energy_after", std::vector<double>(ea.begin(), ea.end())}});
  }
  const json report = {{"transform", transform}, {"length", n}, {"channels", channels}};

  if (a.has("out")) {
    const fs::path dir(a.get("out"));
    ensure_dir(dir);
    write_text(dir / "spectrum.csv", csv.str());
    write_text(dir / "spectrum.json", report.dump(2) + "\n");
  }
  if (format_of(a, "csv") == "json")
    out << report.dump(2) << "\n";
  else
    out << csv.str();
  return kOk;
}

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Index v = 0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || end != item.data() + item.size()) throw ConfigError("not an index list '" + s + "'");
    out.push_back(v);
  }
  return out;
}

int cmd_synth(const Args& a, std::ostream& out) {
  const std::string kind = a.get("kind", "forecast");
  std::uint64_t seed = 2024;
  Dataset ds;
  ForecastTaskSpec task;
  if (a.has("config")) {
    const ExperimentConfig cfg = load_experiment_config(a.get("config"));
    seed = cfg.train.seed;
    if (cfg.synth) {
      task = cfg.synth->task;
      if (cfg.synth->seed) seed = *cfg.synth->seed;
    }
  }
  if (auto s = seed_override(a)) seed = *s;
  Rng rng(seed);
  try {
    if (kind == "forecast") {
      task.channels = a.get_index("channels", task.channels);
      task.length = a.get_index("length", task.length);
      ds = synth_forecast_task(task, rng);
    } else if (kind == "shared_key") {
      const auto carriers = parse_index_list(a.get("carriers", "1,2"));
      ds = synth_shared_key(a.get_index("channels", 4), a.get_index("length", 96), a.get_index("key-bin", 5), carriers,
                            a.get_double("snr", 10.0), rng)
               .dataset;
    } else if (kind == "mid_gap") {
      const Eigen::VectorXd x =
          synth_mid_gap(a.get_index("length", 96), a.get_index("low-bins", 4), a.get_double("mid-leak", 0.05), rng);
      ds.name = "mid_gap";
      ds.channel_names = {"x"};
      ds.values = x.transpose();
    } else {
      throw ConfigError("unknown synth kind '" + kind + "'");
    }
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (a.has("out")) {
    const fs::path dir(a.get("out"));
    ensure_dir(dir);
    try {
      write_csv((dir / "synth.csv").string(), ds);
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  } else {
    write_csv(out, ds);
  }
  return kOk;
}

int cmd_gradcheck(const Args& a, std::ostream& out) {
  ReFocusConfig cfg = gradcheck_config();
  if (a.has("config")) {
    std::ifstream is(a.get("config"));
    if (!is) throw IoError("cannot open " + a.get("config"));
    try {
      cfg = config_from_json(json::parse(is));
      cfg.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  const std::uint64_t seed = seed_override(a).value_or(2024);
  constexpr double kTolerance = 1e-4;
  const ModelGradCheck r = model_gradient_check(cfg, seed);
  const bool ok = r.max_rel_error < kTolerance;
  if (format_of(a, "table") == "json") {
    out << json{{"max_rel_error", r.max_rel_error}, {"parameters", r.parameters_checked},
                {"tolerance", kTolerance}, {"passed", ok}}
               .dump(2)
        << "\n";
  } else {
    out << "gradcheck parameters=" << r.parameters_checked << " max_rel_error=" << num(r.max_rel_error)
        << " tolerance=" << num(kTolerance) << (ok ? " PASS\n" : " FAIL\n");
  }
  return ok ? kOk : kFailure;
}

}  // namespace

// Configuration -------------------------------------------------------------

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  json model_keys = json::object();
  try {
    for (const auto& [key, value] : j.items()) {
      if (kModelKeys.count(key)) model_keys[key] = value;
      else if (key == "dataset") cfg.dataset = value.get<std::string>();
      else if (key == "synth") {
        SynthConfig s;
        s.task = parse_task(value, s.seed);
        cfg.synth = s;
      } else if (key == "split") {
        const auto v = value.get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("split must list three ratios");
        cfg.split = std::array<double, 3>{v[0], v[1], v[2]};
      } else if (key == "model") cfg.model_kind = value.get<std::string>();
      else if (key == "lr") cfg.train.lr = value.get<double>();
      else if (key == "batch_size") cfg.train.batch_size = value.get<Index>();
      else if (key == "max_epochs") cfg.train.max_epochs = value.get<Index>();
      else if (key == "patience") cfg.train.patience = value.get<Index>();
      else if (key == "seed") {
        cfg.train.seed = value.get<std::uint64_t>();
        model_keys["seed"] = cfg.train.seed;
      } else if (key == "ket") cfg.train.ket = parse_ket(value);
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "format") cfg.format = value.get<std::string>();
      else throw ConfigError("unknown key '" + key + "'");
    }
    cfg.channels_given = model_keys.contains("C");
    cfg.model = config_from_json(model_keys);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value: ") + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  if (cfg.dataset.empty() == !cfg.synth.has_value())
    throw ConfigError("exactly one of 'dataset' and 'synth' must be given");
  if (cfg.model_kind != "refocus" && cfg.model_kind != "linear" && cfg.model_kind != "persistence")
    throw ConfigError("unknown model '" + cfg.model_kind + "'");
  if (cfg.format != "json" && cfg.format != "csv") throw ConfigError("format must be csv or json");
  if (cfg.synth) {
    if (cfg.channels_given && cfg.model.channels != cfg.synth->task.channels)
      throw ConfigError("C does not match synth.channels");
    cfg.model.channels = cfg.synth->task.channels;
    cfg.channels_given = true;
  }
  try {
    cfg.model.validate();
    cfg.train.validate();
    if (cfg.split) {
      for (double r : *cfg.split)
        if (!(r >= 0)) throw ContractError("split ratios must be non-negative");
      if (std::abs((*cfg.split)[0] + (*cfg.split)[1] + (*cfg.split)[2] - 1.0) > 1e-9)
        throw ContractError("split ratios must sum to 1");
    }
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig cfg = parse_experiment_config(j);
  // Relative dataset paths resolve against the config file's directory.
  if (!cfg.dataset.empty() && fs::path(cfg.dataset).is_relative() && !fs::exists(cfg.dataset)) {
    const fs::path alt = fs::path(path).parent_path() / cfg.dataset;
    if (fs::exists(alt)) cfg.dataset = alt.string();
  }
  return cfg;
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.train.seed = seed;
  cfg.model.seed = seed;
  if (cfg.synth) cfg.synth->seed = seed;
}

const WindowSet& PreparedData::set(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "'");
}

std::unique_ptr<PreparedData> prepare_data(ExperimentConfig& cfg) {
  Dataset raw;
  if (cfg.synth) {
    Rng rng(cfg.synth->seed.value_or(cfg.train.seed));
    raw = synth_forecast_task(cfg.synth->task, rng);
  } else {
    raw = load_csv(cfg.dataset);
  }
  if (cfg.channels_given && cfg.model.channels != raw.channels())
    throw ConfigError("C = " + std::to_string(cfg.model.channels) + " but the data has " +
                      std::to_string(raw.channels()) + " channels");
  cfg.model.channels = raw.channels();

  auto out = std::make_unique<PreparedData>();
  const Index t = cfg.model.input_length, f = cfg.model.horizon;
  try {
    out->split = chronological_split(raw.length(), cfg.split.value_or(default_split(cfg.dataset)), t);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  out->data = standardize(raw, out->split).first;
  auto make = [&](const Segment& seg) {
    WindowSet s;
    s.values = &out->data.values;
    s.origins = window_origins(seg, t, f);
    s.input_length = t;
    s.horizon = f;
    return s;
  };
  out->train = make(out->split.train);
  out->val = make(out->split.val);
  out->test = make(out->split.test);
  if (out->train.size() == 0 || out->val.size() == 0 || out->test.size() == 0)
    throw ConfigError("series of length " + std::to_string(raw.length()) + " leaves an empty split for T + F = " +
                      std::to_string(t + f));
  return out;
}

std::unique_ptr<Forecaster> build_model(const ExperimentConfig& cfg) {
  Rng rng(cfg.model.seed);
  if (cfg.model_kind == "linear")
    return std::make_unique<LinearForecaster>(cfg.model.input_length, cfg.model.horizon, rng);
  if (cfg.model_kind == "persistence")
    return std::make_unique<PersistenceForecaster>(cfg.model.input_length, cfg.model.horizon);
  return std::make_unique<ReFocusModel>(cfg.model, rng);
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::set<std::string>> kFlags = {
      {"train", {"config", "seed", "out", "format"}},
      {"eval", {"config", "seed", "out", "format", "checkpoint", "split", "baseline"}},
      {"verify", {"seed", "format"}},
      {"spectrum", {"input", "transform", "f-lo", "f-hi", "beta", "K", "out", "format"}},
      {"synth", {"kind", "config", "seed", "out", "channels", "length", "key-bin", "carriers", "snr", "low-bins",
                 "mid-leak"}},
      {"gradcheck", {"config", "seed", "format"}},
  };
  static const std::map<std::string, std::string> kHelp = {
      {"train", "train a model from a config; writes checkpoint, history and metrics"},
      {"eval", "evaluate a checkpoint or baseline on one split"},
      {"verify", "run the numerical identity checks"},
      {"spectrum", "per-bin energy of a CSV series before and after a transform"},
      {"synth", "generate a synthetic dataset as CSV"},
      {"gradcheck", "finite-difference check of the full model gradient"},
  };
  CLI::App app{"ReFocus forecasting toolkit", "refocus"};
  app.require_subcommand(1);
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  std::map<std::string, std::string> values;
  std::vector<std::string> scope;
  for (const auto& [command, flags] : kFlags) {
    CLI::App* sub = app.add_subcommand(command, kHelp.at(command));
    for (const auto& flag : flags)
      options[command].emplace_back(flag, sub->add_option("--" + flag, values[command + "/" + flag]));
    if (command == "verify") sub->add_option("scope", scope, "revin, ameo, ket, grad or all");
  }
  try {
    std::vector<const char*> raw;
    for (const auto& s : argv) raw.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e, out, err);
      throw ConfigError(e.what());
    }
    Args a;
    a.command = app.get_subcommands().front()->get_name();
    a.positional = scope;
    for (const auto& [flag, opt] : options[a.command])
      if (opt->count() > 0) a.flags[flag] = values[a.command + "/" + flag];
    if (a.command == "train") return cmd_train(a, out);
    if (a.command == "eval") return cmd_eval(a, out);
    if (a.command == "verify") return cmd_verify(a, out);
    if (a.command == "spectrum") return cmd_spectrum(a, out);
    if (a.command == "synth") return cmd_synth(a, out);
    return cmd_gradcheck(a, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IngestError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace refocus::cli
