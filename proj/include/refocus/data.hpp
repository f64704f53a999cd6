#pragma once

// Series ingestion, chronological splits, train-fitted standardization,
// supervised windows and synthetic generators.

#include "refocus/nn.hpp"
#include "refocus/tensor.hpp"

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace refocus {

/// Channel-major series: values is C x L.
struct Dataset {
  std::string name;
  std::vector<std::string> channel_names;
  std::vector<std::string> timestamps;
  RowMatrix values;
  std::string granularity;

  Index channels() const { return values.rows(); }
  Index length() const { return values.cols(); }
};

/// CSV problem with its location. `row` counts data rows from 1 (the header
/// is row 0); `column` is 1-based, 0 when not applicable.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, Index row, Index column)
      : std::runtime_error(what), row_(row), column_(column) {}
  Index row() const { return row_; }
  Index column() const { return column_; }

 private:
  Index row_;
  Index column_;
};

/// Header row, first column a timestamp, remaining columns numeric.
Dataset load_csv(const std::string& path);
Dataset parse_csv(std::istream& in, const std::string& name = "csv");
/// Same layout as load_csv reads. Timestamps default to the row index.
void write_csv(std::ostream& out, const Dataset& ds);
void write_csv(const std::string& path, const Dataset& ds);

struct Segment {
  Index begin = 0;
  Index end = 0;  // exclusive

  Index length() const { return end - begin; }
};

struct SplitSpec {
  Segment train;
  Segment val;   // begins `lookback` steps before the first val target
  Segment test;  // likewise
  Index lookback = 0;
};

/// train = [0, floor(r1 L)), val = [floor(r1 L) - T, floor((r1+r2) L)),
/// test = [floor((r1+r2) L) - T, L), with starts clamped at 0.
SplitSpec chronological_split(Index length, std::array<double, 3> ratios, Index lookback);

struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  RowMatrix transform(const Eigen::Ref<const RowMatrix>& values) const;
  RowMatrix inverse(const Eigen::Ref<const RowMatrix>& values) const;
};

/// Fits per-channel mean / std (floor 1e-8) on the train segment and
/// applies them to the whole series.
std::pair<Dataset, Scaler> standardize(const Dataset& ds, const SplitSpec& split);

struct WindowPair {
  RowMatrix x;  // C x T
  RowMatrix y;  // C x F, starts where x ends
  Index origin = 0;
};

/// Start indices of all stride-1 windows inside the segment; empty when the
/// segment is shorter than T + F.
std::vector<Index> window_origins(const Segment& segment, Index input_length, Index horizon);
std::vector<WindowPair> windows(const Eigen::Ref<const RowMatrix>& values, const Segment& segment, Index input_length,
                                Index horizon);

struct SharedKeyTruth {
  Index key_bin = 0;
  std::vector<Index> carriers;
  double noise_std = 0;
};

struct SharedKeyData {
  Dataset dataset;
  SharedKeyTruth truth;
};

/// Carrier channels: unit sinusoid at key_bin with a random phase plus
/// Gaussian noise at power ratio `snr` (signal power 1/2); other channels:
/// noise only. snr = infinity gives noiseless carriers.
SharedKeyData synth_shared_key(Index channels, Index length, Index key_bin, const std::vector<Index>& carriers,
                               double snr, Rng& rng);

/// Unit sinusoids at bins 1..low_bins plus one sinusoid of amplitude
/// mid_leak at a random mid-band bin, random phases.
Eigen::VectorXd synth_mid_gap(Index length, Index low_bins, double mid_leak, Rng& rng);

/// Multichannel forecasting task with a strong slow component per channel
/// and periodic components planted in shared groups of channels.
struct ForecastTaskSpec {
  struct Shared {
    double period = 8;
    double amplitude = 0.5;
    std::vector<Index> channels;
  };

  Index channels = 6;
  Index length = 2000;
  double slow_amplitude = 3.0;
  double slow_period = 400;
  std::vector<Shared> shared;
  double noise_std = 0.3;
};

Dataset synth_forecast_task(const ForecastTaskSpec& spec, Rng& rng);

}  // namespace refocus
