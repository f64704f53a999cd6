#pragma once

// Reference forecasters used to put model errors in context.

#include "refocus/forecaster.hpp"

namespace refocus {

/// Repeats the last observed value over the horizon.
class PersistenceForecaster final : public Forecaster {
 public:
  PersistenceForecaster(Index input_length, Index horizon) : input_length_(input_length), horizon_(horizon) {}

  std::string kind() const override { return "persistence"; }
  Index input_length() const override { return input_length_; }
  Index horizon() const override { return horizon_; }
  Forecast forward(const Tensor& x, Index channels, Rng& rng, const ForecastOptions& options) const override;
  ParameterList parameters() const override { return {}; }

 private:
  Index input_length_;
  Index horizon_;
};

/// One T->F linear map shared by all channels, no normalization.
class LinearForecaster final : public Forecaster {
 public:
  LinearForecaster(Index input_length, Index horizon, Rng& rng);

  std::string kind() const override { return "linear"; }
  Index input_length() const override { return map.in_features(); }
  Index horizon() const override { return map.out_features(); }
  Forecast forward(const Tensor& x, Index channels, Rng& rng, const ForecastOptions& options) const override;
  ParameterList parameters() const override;

  Linear map;
};

}  // namespace refocus
