#pragma once

// Reversible instance normalization and a numerical check of how it acts on
// the energy spectrum.

#include "refocus/spectral.hpp"
#include "refocus/tensor.hpp"

#include <span>
#include <utility>

namespace refocus {

/// Per-channel mean and population standard deviation.
struct RevinStats {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  double eps = 1e-8;
};

/// x[C×T] -> ((x - mu) / (sigma + eps), stats), one row per channel.
std::pair<RowMatrix, RevinStats> revin_normalize(const Eigen::Ref<const RowMatrix>& x, double eps = 1e-8);

/// y * (sigma + eps) + mu, row-wise.
RowMatrix revin_denormalize(const Eigen::Ref<const RowMatrix>& y, const RevinStats& stats);

struct RevinTolerances {
  double dc_relative = 1e-15;  // E(0) bound as a fraction of the largest bin energy
  double ratio = 1e-9;         // bound on |sigma^2 E_norm(f) / E(f) - 1|, f >= 1
};

struct RevinTheoremReport {
  spectral::Convention convention = spectral::Convention::Standard;
  double sigma = 0;
  double dc_energy = 0;   // E of the normalized signal at f = 0
  double max_energy = 0;  // largest bin energy of the normalized signal
  double max_ratio_residual = 0;
  bool dc_ok = false;
  bool ratio_ok = false;

  bool passed() const { return dc_ok && ratio_ok; }
};

/// Normalizes x with eps = 0 and compares the two direct spectra. Throws
/// ContractError for a constant signal.
RevinTheoremReport verify_revin_theorem(std::span<const double> x, const RevinTolerances& tol = {},
                                        spectral::Convention convention = spectral::Convention::Standard);

}  // namespace refocus
