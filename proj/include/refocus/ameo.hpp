#pragma once

// Mid-band energy optimizer: y = x - beta * conv(x, kernel), with a learnable
// length-K kernel starting at 1/K. Also hosts the circular variant and the
// spectral identity it satisfies.

#include "refocus/spectral.hpp"
#include "refocus/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace refocus {

struct AmeoLayer {
  Tensor kernel;  // [K], learnable
  double beta = 0.5;

  Index kernel_size() const { return kernel.size(); }

  /// Kernel of K entries equal to 1/K. Throws for K < 1 or beta outside [0, 1].
  static AmeoLayer init(Index kernel_size, double beta);
};

/// Row-wise "same" convolution with zero padding (floor(K/2) on the left,
/// K-1-floor(K/2) on the right), subtracted from the input:
///   y[r, t] = x[r, t] - beta * sum_k w[k] x[r, t + k - floor(K/2)].
/// Differentiable in both x and the kernel.
Tensor ameo_forward(const Tensor& x, const AmeoLayer& layer);

/// y(t) = x(t) - beta/K * sum_k x((t + 3K/2 - k - 2) mod T). K must be even.
Eigen::VectorXd ameo_circular(std::span<const double> x, Index kernel_size, double beta);

struct AmeoTheoremReport {
  double max_rel_error = 0;
  Index bins_checked = 0;
  bool passed = false;
};

/// Direct standard-convention spectrum of ameo_circular(x) against
/// |X(f)|^2 |1 - beta G(f)|^2 on every bin with |X(f)|^2 > 1e-12.
AmeoTheoremReport verify_ameo_theorem(std::span<const double> x, Index kernel_size, double beta, double tol = 1e-9);

struct GDecayRow {
  Index f = 0;
  double abs_g = 0;
  double gain = 0;  // |1 - beta G(f)|^2
};

struct GDecayReport {
  Index kernel_size = 0;
  Index length = 0;
  double beta = 0;
  spectral::Convention convention = spectral::Convention::Standard;
  std::vector<GDecayRow> rows;  // f = 0..T/2

  double g0_error = 0;              // |G(0) - 1|
  bool leading_nonincreasing = false;  // |G| over f = 0..5
  double tail_max_abs_g = 0;        // max |G(f)| for f >= 10
  double low_band_mean_gain = 0;    // mean gain over [1, T/8)
  double mid_band_mean_gain = 0;    // mean gain over [T/8, 3T/8)

  bool g0_ok() const { return g0_error < 1e-12; }
  bool tail_ok() const { return tail_max_abs_g < 0.2; }
  bool mid_enhanced() const { return mid_band_mean_gain > low_band_mean_gain; }
};

GDecayReport g_decay_report(Index kernel_size, Index length, double beta,
                            spectral::Convention convention = spectral::Convention::Standard);

/// CSV with header `f,abs_g,gain`.
std::string g_decay_csv(const GDecayReport& report);

}  // namespace refocus
