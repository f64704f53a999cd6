#pragma once

// Command-line surface: train, eval, verify, spectrum, synth, gradcheck.

#include "refocus/data.hpp"
#include "refocus/model.hpp"
#include "refocus/training.hpp"

#include <json.hpp>

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace refocus::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthConfig {
  ForecastTaskSpec task;
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
};

struct ExperimentConfig {
  std::string dataset;                // CSV path, or empty when synth is set
  std::optional<SynthConfig> synth;
  std::optional<std::array<double, 3>> split;  // default 6:2:2 for ETT files, else 7:1:2
  std::string model_kind = "refocus";          // refocus, linear or persistence
  ReFocusConfig model;
  bool channels_given = false;
  TrainConfig train;
  std::string out = "out";
  std::string format = "json";
};

/// Validates every section; unknown keys raise ConfigError naming the key.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Replaces every seed the experiment uses.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Standardized series with its split and window sets. Not copyable: the
/// window sets point into `data.values`.
struct PreparedData {
  Dataset data;
  SplitSpec split;
  WindowSet train;
  WindowSet val;
  WindowSet test;

  PreparedData() = default;
  PreparedData(const PreparedData&) = delete;
  PreparedData& operator=(const PreparedData&) = delete;

  const WindowSet& set(const std::string& name) const;
};

/// Loads or generates the series, sets C on the model config when it was
/// not given, and builds the splits.
std::unique_ptr<PreparedData> prepare_data(ExperimentConfig& cfg);

std::unique_ptr<Forecaster> build_model(const ExperimentConfig& cfg);

/// argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace refocus::cli
