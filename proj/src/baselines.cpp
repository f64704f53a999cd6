#include "refocus/baselines.hpp"

namespace refocus {

Forecast PersistenceForecaster::forward(const Tensor& x, Index, Rng&, const ForecastOptions&) const {
  if (x.rank() != 2 || x.cols() != input_length_) throw DimensionError("persistence: input must be [rows x T]");
  const auto xm = x.as_matrix();
  RowMatrix y = xm.col(input_length_ - 1).replicate(1, horizon_);
  return {Tensor::matrix(y), {}, {}};
}

LinearForecaster::LinearForecaster(Index input_length, Index horizon, Rng& rng)
    : map(Linear::init(input_length, horizon, rng)) {}

Forecast LinearForecaster::forward(const Tensor& x, Index, Rng&, const ForecastOptions&) const {
  return {map(x), {}, {}};
}

ParameterList LinearForecaster::parameters() const {
  ParameterList out;
  map.collect(out, "linear");
  return out;
}

}  // namespace refocus
