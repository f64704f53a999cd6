#pragma once

// Parameter-holding layers shared by the block and the full model.

#include "refocus/tensor.hpp"

#include <random>
#include <string>
#include <vector>

namespace refocus {

using Rng = std::mt19937_64;

enum class Activation { Gelu, Relu };

Tensor activate(const Tensor& x, Activation act);

/// Named handle to a learnable leaf tensor.
struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

/// y = x W + b with W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Index in_features() const { return weight.shape()[0]; }
  Index out_features() const { return weight.shape()[1]; }

  /// Weights uniform in +-1/sqrt(in), zero bias.
  static Linear init(Index in, Index out, Rng& rng);
  static Linear identity(Index n);

  Tensor operator()(const Tensor& x) const { return add_row_bias(matmul(x, weight), bias); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Two linear layers with an activation in between.
struct Mlp {
  Linear first;
  Linear second;
  Activation activation = Activation::Gelu;

  static Mlp init(Index in, Index hidden, Index out, Activation act, Rng& rng);

  Tensor operator()(const Tensor& x) const { return second(activate(first(x), activation)); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  static LayerNorm init(Index d);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Complex linear map between half-spectra: rfft (length D1) -> W -> +b ->
/// irfft (length D2). Weights are [(D1/2+1) x (D2/2+1)] real/imag pairs.
struct FreqProjection {
  Tensor weight_re;
  Tensor weight_im;
  Tensor bias_re;
  Tensor bias_im;
  Index in_length = 0;
  Index out_length = 0;

  /// Real and imaginary entries uniform in +-1/sqrt(D1/2+1), zero bias.
  static FreqProjection init(Index in_length, Index out_length, Rng& rng);
  /// W = I on the shared bins, zero elsewhere.
  static FreqProjection identity(Index in_length, Index out_length);

  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

/// Number of learnable scalars (complex entries count twice).
Index param_count(const ParameterList& params);

/// Copies parameter values (not gradients) between two structurally
/// identical parameter lists.
void assign_parameters(const ParameterList& dst, const ParameterList& src);
std::vector<Eigen::VectorXd> snapshot_parameters(const ParameterList& params);
void restore_parameters(const ParameterList& params, const std::vector<Eigen::VectorXd>& values);

}  // namespace refocus
