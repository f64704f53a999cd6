#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace refocus {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when operand extents do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation's precondition (bad length,
/// non-scalar gradient root, non-finite values, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
struct Node;
}

/// Dense float64 tensor with row-major storage. Copies are shallow handles;
/// a tensor produced by an op keeps references to its inputs so that a
/// backward pass can walk the graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, Eigen::VectorXd data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad = false);
  static Tensor vector(std::span<const double> v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index size() const;
  Index rows() const;
  Index cols() const;

  const Eigen::VectorXd& data() const;
  /// Writable storage; only meaningful on leaves (parameters).
  Eigen::VectorXd& mutable_data();
  Eigen::Map<const RowMatrix> as_matrix() const;
  double item() const;
  double at(Index flat) const { return data()[flat]; }

  bool requires_grad() const;
  bool has_grad() const;
  const Eigen::VectorXd& grad() const;
  Eigen::Map<const RowMatrix> grad_matrix() const;
  void zero_grad();

  /// Same values, no graph history.
  Tensor detach() const;

  /// Name of the op that produced this tensor ("leaf" for inputs).
  const char* op_name() const;

  // Internal: used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of every op reachable from a scalar root, in execution
/// order. Built on demand; backward() walks it in reverse.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  /// Names of recorded ops in execution order.
  std::vector<std::string> op_names() const;
  /// Seeds d(root)/d(root) = 1 and accumulates grad on every requires_grad
  /// ancestor. Only valid once per tape.
  void backward();

 private:
  Tensor root_;
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  bool consumed_ = false;
};

inline void backward(const Tensor& root) { Tape(root).backward(); }

// Linear algebra and pointwise ops. Shapes must agree exactly; the only
// broadcast is the explicit scalar in scale() and the named row/column ops
// further down.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation

Tensor softmax(const Tensor& x, Index axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, Index axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, Index axis);

/// x[R×n] + b[n] on every row.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// Per-row constant affine map: x[r, :] * scale[r] + shift[r]. The
/// coefficients are data, not graph inputs.
Tensor rows_affine(const Tensor& x, const Eigen::VectorXd& scale, const Eigen::VectorXd& shift);
/// x[B×n] -> [B*copies × n], row b repeated `copies` times consecutively.
Tensor repeat_rows(const Tensor& x, Index copies);
/// x[B*group × n] -> [B × n], out[b, j] = x[b*group + choice[b*n + j], j].
Tensor gather_group_rows(const Tensor& x, Index group, std::span<const Index> choice);

/// Half-spectrum of a real tensor as separate real and imaginary parts.
struct ComplexTensor {
  Tensor re;
  Tensor im;
};

/// Row-wise unnormalized real FFT, [R×n] -> 2 × [R×(n/2+1)].
ComplexTensor rfft_rows(const Tensor& x);
/// Row-wise inverse with 1/n scaling, 2 × [R×(n/2+1)] -> [R×n].
Tensor irfft_rows(const Tensor& re, const Tensor& im, Index n);

Tensor mse_loss(const Tensor& pred, const Tensor& target);

using ScalarFunction = std::function<Tensor(const Tensor&)>;

/// Compares the tape gradient of f at x against central differences with
/// step h. Returns max_i |a_i - b_i| / max(1, |a_i|, |b_i|).
double grad_check(const ScalarFunction& f, const Tensor& x, double h = 1e-5);

/// Same comparison for a closure over several leaf parameters, which are
/// perturbed in place and restored.
double grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params, double h = 1e-5);

}  // namespace refocus
