#pragma once

#include "refocus/ekpb.hpp"
#include "refocus/nn.hpp"

#include <span>
#include <string>
#include <vector>

namespace refocus {

struct ForecastOptions {
  bool training = false;
  bool keep_traces = false;
  /// Per-block selections to replay instead of picking afresh.
  std::span<const std::vector<Index>> forced_choices;
};

struct Forecast {
  Tensor y;                                    // [B*C x F]
  std::vector<std::vector<PickTrace>> traces;  // [block][sample]
  std::vector<std::vector<Index>> choices;     // [block][B x bins]
};

/// Anything that maps a batch of windows [B*C x T] (channels of each sample
/// consecutive) to forecasts [B*C x F].
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual std::string kind() const = 0;
  virtual Index input_length() const = 0;
  virtual Index horizon() const = 0;
  virtual Forecast forward(const Tensor& x, Index channels, Rng& rng, const ForecastOptions& options) const = 0;
  virtual ParameterList parameters() const = 0;
};

}  // namespace refocus
