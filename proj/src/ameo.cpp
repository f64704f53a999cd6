#include "refocus/ameo.hpp"

#include "refocus/tensor_op.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace refocus {

AmeoLayer AmeoLayer::init(Index kernel_size, double beta) {
  if (kernel_size < 1) throw ContractError("AmeoLayer: kernel size must be at least 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ContractError("AmeoLayer: beta must lie in [0, 1]");
  AmeoLayer layer;
  layer.kernel = Tensor::full({kernel_size}, 1.0 / double(kernel_size), true);
  layer.beta = beta;
  return layer;
}

Tensor ameo_forward(const Tensor& x, const AmeoLayer& layer) {
  if (x.rank() != 2) throw DimensionError("ameo_forward: expected [rows x T]");
  const Index rows = x.rows(), len = x.cols(), k_size = layer.kernel_size();
  if (len < k_size) throw ContractError("ameo_forward: series shorter than the kernel");
  const Index pad = k_size / 2;
  const double beta = layer.beta;
  const auto& w = layer.kernel.data();
  const auto& xv = x.data();
  Eigen::VectorXd out(rows * len);
  for (Index r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * len;
    for (Index t = 0; t < len; ++t) {
      double acc = 0;
      for (Index k = 0; k < k_size; ++k) {
        const Index s = t + k - pad;
        if (s >= 0 && s < len) acc += w[k] * xr[s];
      }
      out[r * len + t] = xr[t] - beta * acc;
    }
  }
  return detail::make_result("ameo", x.shape(), std::move(out), {x, layer.kernel},
                             [rows, len, k_size, pad, beta](detail::Node& self) {
                               detail::Node& px = *self.parents[0];
                               detail::Node& pw = *self.parents[1];
                               const auto& g = self.grad;
                               if (px.requires_grad) {
                                 Eigen::VectorXd gx = g;
                                 for (Index r = 0; r < rows; ++r)
                                   for (Index t = 0; t < len; ++t)
                                     for (Index k = 0; k < k_size; ++k) {
                                       const Index s = t + k - pad;
                                       if (s >= 0 && s < len) gx[r * len + s] -= beta * pw.value[k] * g[r * len + t];
                                     }
                                 detail::accumulate(px, gx);
                               }
                               if (pw.requires_grad) {
                                 Eigen::VectorXd gw = Eigen::VectorXd::Zero(k_size);
                                 for (Index r = 0; r < rows; ++r)
                                   for (Index t = 0; t < len; ++t)
                                     for (Index k = 0; k < k_size; ++k) {
                                       const Index s = t + k - pad;
                                       if (s >= 0 && s < len) gw[k] -= beta * g[r * len + t] * px.value[r * len + s];
                                     }
                                 detail::accumulate(pw, gw);
                               }
                             });
}

Eigen::VectorXd ameo_circular(std::span<const double> x, Index kernel_size, double beta) {
  const Index n = static_cast<Index>(x.size());
  if (n < 2) throw ContractError("ameo_circular: need T >= 2");
  if (kernel_size < 1 || kernel_size % 2 != 0) throw ContractError("ameo_circular: kernel size must be even");
  Eigen::VectorXd y(n);
  for (Index t = 0; t < n; ++t) {
    double acc = 0;
    for (Index k = 0; k < kernel_size; ++k) {
      const Index shift = 3 * kernel_size / 2 - k - 2;
      Index idx = (t + shift) % n;
      if (idx < 0) idx += n;
      acc += x[idx];
    }
    y[t] = x[t] - beta / double(kernel_size) * acc;
  }
  return y;
}

AmeoTheoremReport verify_ameo_theorem(std::span<const double> x, Index kernel_size, double beta, double tol) {
  const Index n = static_cast<Index>(x.size());
  const Eigen::VectorXd y = ameo_circular(x, kernel_size, beta);
  const auto ex = spectral::energy(spectral::dft_standard<double>(x));
  const auto ey = spectral::energy(spectral::dft_standard<double>(std::span<const double>(y.data(), y.size())));
  AmeoTheoremReport r;
  for (Index f = 0; f < n; ++f) {
    if (ex[f] <= 1e-12) continue;
    const auto g = spectral::g_function(f, kernel_size, n, spectral::Convention::Standard);
    const double predicted = ex[f] * std::norm(1.0 - beta * g);
    // Bins the identity drives to (near) zero, e.g. f = 0 at beta = 1, are
    // measured against the input energy instead.
    const double denom = predicted > 1e-9 * ex[f] ? predicted : ex[f];
    const double rel = std::abs(ey[f] - predicted) / denom;
    r.max_rel_error = std::max(r.max_rel_error, rel);
    ++r.bins_checked;
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

GDecayReport g_decay_report(Index kernel_size, Index length, double beta, spectral::Convention convention) {
  GDecayReport rep;
  rep.kernel_size = kernel_size;
  rep.length = length;
  rep.beta = beta;
  rep.convention = convention;
  for (Index f = 0; f <= length / 2; ++f) {
    const auto g = spectral::g_function(f, kernel_size, length, convention);
    rep.rows.push_back({f, std::abs(g), std::norm(1.0 - beta * g)});
  }
  rep.g0_error = std::abs(spectral::g_function(0, kernel_size, length, convention) - std::complex<double>(1.0, 0.0));

  rep.leading_nonincreasing = true;
  for (Index f = 1; f <= 5 && f < static_cast<Index>(rep.rows.size()); ++f)
    if (rep.rows[f].abs_g > rep.rows[f - 1].abs_g) rep.leading_nonincreasing = false;
  for (Index f = 10; f < static_cast<Index>(rep.rows.size()); ++f)
    rep.tail_max_abs_g = std::max(rep.tail_max_abs_g, rep.rows[f].abs_g);

  const auto b = spectral::bands(length);
  double low = 0, mid = 0;
  for (Index f = b.low_begin; f < b.mid_begin; ++f) low += rep.rows[f].gain;
  for (Index f = b.mid_begin; f < b.mid_end; ++f) mid += rep.rows[f].gain;
  rep.low_band_mean_gain = b.mid_begin > b.low_begin ? low / double(b.mid_begin - b.low_begin) : 0.0;
  rep.mid_band_mean_gain = b.mid_end > b.mid_begin ? mid / double(b.mid_end - b.mid_begin) : 0.0;
  return rep;
}

std::string g_decay_csv(const GDecayReport& report) {
  std::ostringstream os;
  os << "f,abs_g,gain\n";
  char buf[96];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%td,%.17g,%.17g\n", static_cast<std::ptrdiff_t>(row.f), row.abs_g, row.gain);
    os << buf;
  }
  return os.str();
}

}  // namespace refocus
