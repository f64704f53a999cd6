#pragma once

// Fourier machinery: a radix-2 / Bluestein complex FFT, real half-spectrum
// transforms, direct O(n^2) DFTs under either divisor convention, ideal
// filters, the AMEO gain factor G(f) and the mid-band energy share.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace refocus::spectral {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Which divisor the exponent e^{-i 2 pi f t / d} uses: d = T (Standard)
/// or d = T - 1 (Reduced).
enum class Convention { Standard, Reduced };

inline Index divisor_for(Convention c, Index n) { return c == Convention::Standard ? n : n - 1; }

/// Half-spectrum of a real signal: bins 0..n_time/2.
template <typename Scalar>
struct ComplexSpectrum {
  Vec<Scalar> re;
  Vec<Scalar> im;
  Index n_time = 0;

  Index bins() const { return re.size(); }
};

/// All T bins f = 0..T-1 of a direct DFT.
template <typename Scalar>
struct FullSpectrum {
  Vec<Scalar> re;
  Vec<Scalar> im;
  Convention convention = Convention::Standard;
};

inline Index half_bins(Index n) { return n / 2 + 1; }

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

template <typename Scalar>
struct Pow2Plan {
  std::vector<std::complex<Scalar>> twiddle;  // e^{-2 pi i k / n}, k < n/2
  std::vector<std::size_t> bitrev;
};

template <typename Scalar>
const Pow2Plan<Scalar>& pow2_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Pow2Plan<Scalar>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Pow2Plan<Scalar> plan;
  plan.twiddle.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const Scalar ang = -Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(n);
    plan.twiddle[k] = {std::cos(ang), std::sin(ang)};
  }
  plan.bitrev.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    plan.bitrev[i] = r;
  }
  return cache.emplace(n, std::move(plan)).first->second;
}

template <typename Scalar>
void fft_pow2(std::vector<std::complex<Scalar>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  const auto& plan = pow2_plan<Scalar>(n);
  for (std::size_t i = 0; i < n; ++i)
    if (i < plan.bitrev[i]) std::swap(a[i], a[plan.bitrev[i]]);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<Scalar> w = plan.twiddle[k * step];
        if (inverse) w = std::conj(w);
        const auto u = a[start + k];
        const auto v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

template <typename Scalar>
struct BluesteinPlan {
  std::size_t m = 0;
  std::vector<std::complex<Scalar>> chirp;       // e^{-i pi k^2 / n}
  std::vector<std::complex<Scalar>> kernel_fft;  // FFT of conj chirp, wrapped
};

template <typename Scalar>
const BluesteinPlan<Scalar>& bluestein_plan(std::size_t n) {
  thread_local std::unordered_map<std::size_t, BluesteinPlan<Scalar>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  BluesteinPlan<Scalar> plan;
  plan.m = next_pow2(2 * n - 1);
  plan.chirp.resize(n);
  const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small and exact.
    const std::uint64_t r = (static_cast<std::uint64_t>(k) * k) % two_n;
    const Scalar ang = -std::numbers::pi_v<Scalar> * Scalar(r) / Scalar(n);
    plan.chirp[k] = {std::cos(ang), std::sin(ang)};
  }
  plan.kernel_fft.assign(plan.m, {});
  plan.kernel_fft[0] = std::conj(plan.chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    plan.kernel_fft[k] = std::conj(plan.chirp[k]);
    plan.kernel_fft[plan.m - k] = std::conj(plan.chirp[k]);
  }
  fft_pow2(plan.kernel_fft, false);
  return cache.emplace(n, std::move(plan)).first->second;
}

template <typename Scalar>
void fft_bluestein(std::vector<std::complex<Scalar>>& a, bool inverse) {
  const std::size_t n = a.size();
  const auto& plan = bluestein_plan<Scalar>(n);
  // The inverse transform is conj(FFT(conj(a))).
  if (inverse)
    for (auto& v : a) v = std::conj(v);
  std::vector<std::complex<Scalar>> work(plan.m);
  for (std::size_t k = 0; k < n; ++k) work[k] = a[k] * plan.chirp[k];
  fft_pow2(work, false);
  for (std::size_t k = 0; k < plan.m; ++k) work[k] *= plan.kernel_fft[k];
  fft_pow2(work, true);
  const Scalar inv_m = Scalar(1) / Scalar(plan.m);
  for (std::size_t k = 0; k < n; ++k) a[k] = work[k] * inv_m * plan.chirp[k];
  if (inverse)
    for (auto& v : a) v = std::conj(v);
}

}  // namespace detail

/// In-place unnormalized complex DFT. Forward uses e^{-i...}, inverse
/// e^{+i...}; neither direction divides by n.
template <typename Scalar>
void fft(std::vector<std::complex<Scalar>>& a, bool inverse = false) {
  if (a.size() <= 1) return;
  if (detail::is_pow2(a.size()))
    detail::fft_pow2(a, inverse);
  else
    detail::fft_bluestein(a, inverse);
}

/// Unnormalized forward real FFT, returning bins 0..n/2.
template <typename Scalar>
ComplexSpectrum<Scalar> rfft(std::span<const Scalar> x) {
  const Index n = static_cast<Index>(x.size());
  if (n < 1) throw std::invalid_argument("rfft: empty signal");
  std::vector<std::complex<Scalar>> a(x.begin(), x.end());
  fft(a, false);
  ComplexSpectrum<Scalar> s;
  s.n_time = n;
  const Index nb = half_bins(n);
  s.re.resize(nb);
  s.im.resize(nb);
  for (Index j = 0; j < nb; ++j) {
    s.re[j] = a[j].real();
    s.im[j] = a[j].imag();
  }
  return s;
}

template <typename Scalar>
ComplexSpectrum<Scalar> rfft(const Vec<Scalar>& x) {
  return rfft<Scalar>(std::span<const Scalar>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Inverse of rfft with the 1/n factor. The imaginary parts of the DC bin
/// and (for even n) the Nyquist bin do not contribute.
template <typename Scalar>
Vec<Scalar> irfft(const ComplexSpectrum<Scalar>& s, Index n) {
  if (n < 1 || s.re.size() != half_bins(n) || s.im.size() != s.re.size())
    throw std::invalid_argument("irfft: spectrum length does not match n");
  std::vector<std::complex<Scalar>> a(static_cast<std::size_t>(n));
  const Index nb = half_bins(n);
  for (Index j = 0; j < nb; ++j) a[j] = {s.re[j], s.im[j]};
  a[0].imag(0);
  if (n % 2 == 0) a[n / 2].imag(0);
  for (Index j = nb; j < n; ++j) a[j] = std::conj(a[n - j]);
  fft(a, true);
  Vec<Scalar> out(n);
  for (Index t = 0; t < n; ++t) out[t] = a[t].real() / Scalar(n);
  return out;
}

/// Direct O(T^2) DFT over all T bins with divisor d:
/// X(f) = sum_t x(t) e^{-i 2 pi f t / d}. The product f*t is reduced
/// modulo d before the trigonometric call.
template <typename Scalar>
FullSpectrum<Scalar> dft_direct(std::span<const Scalar> x, Convention convention) {
  const Index n = static_cast<Index>(x.size());
  if (n < 2) throw std::invalid_argument("dft: signal length must be at least 2");
  const Index d = divisor_for(convention, n);
  FullSpectrum<Scalar> s;
  s.convention = convention;
  s.re = Vec<Scalar>::Zero(n);
  s.im = Vec<Scalar>::Zero(n);
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  for (Index f = 0; f < n; ++f) {
    Scalar re = 0, im = 0;
    for (Index t = 0; t < n; ++t) {
      const Index r = (f * t) % d;
      const Scalar ang = -two_pi * Scalar(r) / Scalar(d);
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    s.re[f] = re;
    s.im[f] = im;
  }
  return s;
}

/// X(f) = sum x(t) e^{-i 2 pi f t / (T-1)}, f = 0..T-1. No fast path.
template <typename Scalar>
FullSpectrum<Scalar> dft_reduced(std::span<const Scalar> x) {
  return dft_direct<Scalar>(x, Convention::Reduced);
}

template <typename Scalar>
FullSpectrum<Scalar> dft_standard(std::span<const Scalar> x) {
  return dft_direct<Scalar>(x, Convention::Standard);
}

template <typename Scalar>
Vec<Scalar> energy(const ComplexSpectrum<Scalar>& s) {
  return s.re.array().square() + s.im.array().square();
}

template <typename Scalar>
Vec<Scalar> energy(const FullSpectrum<Scalar>& s) {
  return s.re.array().square() + s.im.array().square();
}

enum class FilterKind { Low, High };

/// Ideal brick-wall filter in the half-spectrum. Low keeps bins <= f_hi,
/// High keeps bins >= f_lo.
template <typename Scalar>
Vec<Scalar> ideal_filter(std::span<const Scalar> x, Index f_lo, Index f_hi, FilterKind kind) {
  const Index n = static_cast<Index>(x.size());
  if (n < 1 || f_lo < 0 || f_lo > f_hi || f_hi > n / 2)
    throw std::invalid_argument("ideal_filter: band must satisfy 0 <= f_lo <= f_hi <= n/2");
  auto s = rfft<Scalar>(x);
  for (Index j = 0; j < s.bins(); ++j) {
    const bool keep = kind == FilterKind::Low ? j <= f_hi : j >= f_lo;
    if (!keep) {
      s.re[j] = 0;
      s.im[j] = 0;
    }
  }
  return irfft(s, n);
}

/// Keeps bins <= low_upto and bins >= high_from, zeroing the band between.
template <typename Scalar>
Vec<Scalar> band_stop(std::span<const Scalar> x, Index low_upto, Index high_from) {
  const Index n = static_cast<Index>(x.size());
  if (low_upto < 0 || low_upto >= high_from || high_from > n / 2)
    throw std::invalid_argument("band_stop: need 0 <= low_upto < high_from <= n/2");
  auto s = rfft<Scalar>(x);
  for (Index j = low_upto + 1; j < high_from; ++j) {
    s.re[j] = 0;
    s.im[j] = 0;
  }
  return irfft(s, n);
}

/// Half-spectrum partition used by the mid-band metric:
/// low [1, n/8), mid [n/8, 3n/8), high [3n/8, n/2].
struct Bands {
  Index low_begin = 1;
  Index mid_begin = 0;
  Index mid_end = 0;
  Index high_end = 0;  // inclusive
};

inline Bands bands(Index n) {
  Bands b;
  b.mid_begin = n / 8;
  b.mid_end = 3 * n / 8;
  b.high_end = n / 2;
  return b;
}

/// Share of non-DC half-spectrum energy that falls in the mid band. Zero
/// when the signal carries no non-DC energy.
template <typename Scalar>
Scalar mid_gap_metric(std::span<const Scalar> x) {
  const Index n = static_cast<Index>(x.size());
  if (n < 8) throw std::invalid_argument("mid_gap_metric: signal length must be at least 8");
  const auto e = energy(rfft<Scalar>(x));
  const Bands b = bands(n);
  Scalar mid = 0, total = 0;
  for (Index j = 1; j <= b.high_end; ++j) {
    total += e[j];
    if (j >= b.mid_begin && j < b.mid_end) mid += e[j];
  }
  if (total == Scalar(0)) return Scalar(0);
  return mid / total;
}

template <typename Scalar>
Scalar mid_gap_metric(const Vec<Scalar>& x) {
  return mid_gap_metric<Scalar>(std::span<const Scalar>(x.data(), static_cast<std::size_t>(x.size())));
}

/// G(f) = (1/K) sum_{k<K} e^{i 2 pi f (3K/2 - k - 2) / d}. The exponent is
/// formed as the exact rational f (3K - 2k - 4) / (2d) and reduced modulo
/// one full turn before the exponential.
template <typename Scalar = double>
std::complex<Scalar> g_function(Index f, Index kernel, Index length, Convention convention) {
  if (kernel < 1 || length < 2) throw std::invalid_argument("g_function: need K >= 1 and T >= 2");
  const std::int64_t d = divisor_for(convention, length);
  const std::int64_t den = 2 * d;
  Scalar re = 0, im = 0;
  for (Index k = 0; k < kernel; ++k) {
    std::int64_t num = static_cast<std::int64_t>(f) * (3 * kernel - 2 * k - 4);
    num %= den;
    if (num < 0) num += den;
    const Scalar ang = std::numbers::pi_v<Scalar> * Scalar(num) / Scalar(d);
    re += std::cos(ang);
    im += std::sin(ang);
  }
  return {re / Scalar(kernel), im / Scalar(kernel)};
}

}  // namespace refocus::spectral
