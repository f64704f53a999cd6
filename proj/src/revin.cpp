#include "refocus/revin.hpp"

#include <algorithm>
#include <cmath>

namespace refocus {

std::pair<RowMatrix, RevinStats> revin_normalize(const Eigen::Ref<const RowMatrix>& x, double eps) {
  if (x.cols() < 2) throw ContractError("revin_normalize: need at least two time steps");
  RevinStats stats;
  stats.eps = eps;
  stats.mu = x.rowwise().mean();
  const RowMatrix centered = x.colwise() - stats.mu;
  stats.sigma = (centered.array().square().rowwise().sum() / double(x.cols())).sqrt();
  RowMatrix out = centered.array().colwise() / (stats.sigma.array() + eps);
  return {std::move(out), std::move(stats)};
}

RowMatrix revin_denormalize(const Eigen::Ref<const RowMatrix>& y, const RevinStats& stats) {
  if (y.rows() != stats.mu.size()) throw DimensionError("revin_denormalize: channel count mismatch");
  return (y.array().colwise() * (stats.sigma.array() + stats.eps)).colwise() + stats.mu.array();
}

RevinTheoremReport verify_revin_theorem(std::span<const double> x, const RevinTolerances& tol,
                                        spectral::Convention convention) {
  const Index n = static_cast<Index>(x.size());
  const RowMatrix row = Eigen::Map<const RowMatrix>(x.data(), 1, n);
  auto [xn, stats] = revin_normalize(row, 0.0);
  if (!(stats.sigma[0] > 0)) throw ContractError("verify_revin_theorem: signal is constant (sigma = 0)");

  const Eigen::VectorXd xn_vec = xn.row(0).transpose();
  const auto e_orig = spectral::energy(spectral::dft_direct<double>(x, convention));
  const auto e_norm = spectral::energy(
      spectral::dft_direct<double>(std::span<const double>(xn_vec.data(), static_cast<std::size_t>(n)), convention));

  RevinTheoremReport r;
  r.convention = convention;
  r.sigma = stats.sigma[0];
  r.dc_energy = e_norm[0];
  r.max_energy = e_norm.maxCoeff();
  const double s2 = r.sigma * r.sigma;
  for (Index f = 1; f < n; ++f) {
    const double denom = std::max(e_orig[f], 1e-300);
    r.max_ratio_residual = std::max(r.max_ratio_residual, std::abs(s2 * e_norm[f] / denom - 1.0));
  }
  r.dc_ok = r.dc_energy < tol.dc_relative * r.max_energy;
  r.ratio_ok = r.max_ratio_residual < tol.ratio;
  return r;
}

}  // namespace refocus
