#include "refocus/nn.hpp"

#include "refocus/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace refocus {

Tensor activate(const Tensor& x, Activation act) { return act == Activation::Gelu ? gelu(x) : relu(x); }

namespace {
Tensor uniform(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.mutable_data()) v = dist(rng);
  return t;
}
}  // namespace

Linear Linear::init(Index in, Index out, Rng& rng) {
  return {uniform({in, out}, 1.0 / std::sqrt(double(in)), rng), Tensor::zeros({out}, true)};
}

Linear Linear::identity(Index n) {
  return {Tensor::matrix(RowMatrix::Identity(n, n), true), Tensor::zeros({n}, true)};
}

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Mlp Mlp::init(Index in, Index hidden, Index out, Activation act, Rng& rng) {
  Mlp m;
  m.first = Linear::init(in, hidden, rng);
  m.second = Linear::init(hidden, out, rng);
  m.activation = act;
  return m;
}

void Mlp::collect(ParameterList& out, const std::string& prefix) const {
  first.collect(out, prefix + ".0");
  second.collect(out, prefix + ".1");
}

LayerNorm LayerNorm::init(Index d) { return {Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)}; }

void LayerNorm::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

FreqProjection FreqProjection::init(Index in_length, Index out_length, Rng& rng) {
  const Index b1 = spectral::half_bins(in_length), b2 = spectral::half_bins(out_length);
  const double bound = 1.0 / std::sqrt(double(b1));
  FreqProjection p;
  p.weight_re = uniform({b1, b2}, bound, rng);
  p.weight_im = uniform({b1, b2}, bound, rng);
  p.bias_re = Tensor::zeros({b2}, true);
  p.bias_im = Tensor::zeros({b2}, true);
  p.in_length = in_length;
  p.out_length = out_length;
  return p;
}

FreqProjection FreqProjection::identity(Index in_length, Index out_length) {
  const Index b1 = spectral::half_bins(in_length), b2 = spectral::half_bins(out_length);
  FreqProjection p;
  p.weight_re = Tensor::matrix(RowMatrix::Identity(b1, b2), true);
  p.weight_im = Tensor::zeros({b1, b2}, true);
  p.bias_re = Tensor::zeros({b2}, true);
  p.bias_im = Tensor::zeros({b2}, true);
  p.in_length = in_length;
  p.out_length = out_length;
  return p;
}

Tensor FreqProjection::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_length) throw ContractError("freq_project: input length does not match D1");
  const auto s = rfft_rows(x);
  // (a + ib)(c + id) = (ac - bd) + i(ad + bc)
  const Tensor re = add_row_bias(sub(matmul(s.re, weight_re), matmul(s.im, weight_im)), bias_re);
  const Tensor im = add_row_bias(add(matmul(s.re, weight_im), matmul(s.im, weight_re)), bias_im);
  return irfft_rows(re, im, out_length);
}

void FreqProjection::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight_re", weight_re});
  out.push_back({prefix + ".weight_im", weight_im});
  out.push_back({prefix + ".bias_re", bias_re});
  out.push_back({prefix + ".bias_im", bias_im});
}

Index param_count(const ParameterList& params) {
  Index n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

void assign_parameters(const ParameterList& dst, const ParameterList& src) {
  if (dst.size() != src.size()) throw std::runtime_error("assign_parameters: parameter lists differ");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].tensor.shape() != src[i].tensor.shape())
      throw std::runtime_error("assign_parameters: shape mismatch for " + dst[i].name);
    Tensor t = dst[i].tensor;
    t.mutable_data() = src[i].tensor.data();
  }
}

std::vector<Eigen::VectorXd> snapshot_parameters(const ParameterList& params) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.data());
  return out;
}

void restore_parameters(const ParameterList& params, const std::vector<Eigen::VectorXd>& values) {
  if (params.size() != values.size()) throw std::runtime_error("restore_parameters: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    t.mutable_data() = values[i];
  }
}

}  // namespace refocus
