#include "refocus/tensor.hpp"

#include "refocus/spectral.hpp"
#include "refocus/tensor_op.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace refocus {

namespace detail {

namespace {
std::atomic<std::uint64_t> g_sequence{0};

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}
}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

Tensor make_result(const char* op, Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  if (!value.allFinite()) throw ContractError(std::string("non-finite value produced by op '") + op + "'");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->seq = g_sequence.fetch_add(1, std::memory_order_relaxed);
  for (const auto& t : inputs) node->requires_grad = node->requires_grad || t.requires_grad();
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void accumulate(Node& n, const Eigen::Ref<const Eigen::VectorXd>& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Eigen::VectorXd::Zero(n.value.size());
  n.grad += g;
}

}  // namespace detail

using detail::Node;

namespace {

void check_shape(const Shape& shape, Index data_size) {
  for (Index e : shape)
    if (e <= 0) throw DimensionError("tensor extents must be positive");
  if (detail::shape_size(shape) != data_size) throw DimensionError("shape does not match data length");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + detail::shape_str(a.shape()));
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

// (outer, extent, inner) decomposition around an axis.
struct AxisView {
  Index outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, Index axis, const char* op) {
  if (axis < 0 || axis >= static_cast<Index>(s.size())) throw DimensionError(std::string(op) + ": axis out of range");
  AxisView v;
  for (Index i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor handle

Tensor Tensor::from(Shape shape, Eigen::VectorXd data, bool requires_grad) {
  check_shape(shape, data.size());
  if (!data.allFinite()) throw ContractError("non-finite value in tensor construction");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = detail::g_sequence.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const Index n = detail::shape_size(shape);
  return from(std::move(shape), Eigen::VectorXd::Constant(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, Eigen::VectorXd::Constant(1, value), requires_grad);
}

Tensor Tensor::matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad) {
  Eigen::VectorXd v(m.size());
  Eigen::Map<RowMatrix>(v.data(), m.rows(), m.cols()) = m;
  return from({m.rows(), m.cols()}, std::move(v), requires_grad);
}

Tensor Tensor::vector(std::span<const double> v, bool requires_grad) {
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
  return from({static_cast<Index>(v.size())}, std::move(d), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
Index Tensor::size() const { return node_->value.size(); }

Index Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not a matrix");
  return shape()[0];
}

Index Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not a matrix");
  return shape()[1];
}

const Eigen::VectorXd& Tensor::data() const { return node_->value; }
Eigen::VectorXd& Tensor::mutable_data() { return node_->value; }

Eigen::Map<const RowMatrix> Tensor::as_matrix() const {
  return detail::as_matrix(node_->value, rows(), cols());
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor has more than one element");
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() != 0; }

const Eigen::VectorXd& Tensor::grad() const {
  if (!has_grad()) node_->grad = Eigen::VectorXd::Zero(node_->value.size());
  return node_->grad;
}

Eigen::Map<const RowMatrix> Tensor::grad_matrix() const { return detail::as_matrix(grad(), rows(), cols()); }

void Tensor::zero_grad() {
  if (node_) node_->grad.resize(0);
}

Tensor Tensor::detach() const { return from(shape(), data(), false); }

const char* Tensor::op_name() const { return node_->op; }

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Tensor& root) : root_(root) {
  if (!root.defined()) throw ContractError("backward: undefined root");
  std::vector<Node*> stack{root.node().get()};
  std::unordered_set<Node*> seen{root.node().get()};
  std::vector<std::shared_ptr<Node>> found{root.node()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        found.push_back(p);
        stack.push_back(p.get());
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a->seq < b->seq; });
  nodes_ = std::move(found);
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_)
    if (!n->parents.empty()) out.emplace_back(n->op);
  return out;
}

void Tape::backward() {
  if (consumed_) throw ContractError("backward: tape already consumed");
  consumed_ = true;
  if (root_.size() != 1) throw ContractError("backward: root must be a scalar");
  Node& root = *root_.node();
  if (!root.requires_grad) return;
  detail::accumulate(root, Eigen::VectorXd::Ones(1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.grad.size() != 0) n.backward(n);
  }
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const Index m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError("matmul: inner dimensions disagree");
  Eigen::VectorXd out(m * n);
  Eigen::Map<RowMatrix>(out.data(), m, n).noalias() = a.as_matrix() * b.as_matrix();
  return detail::make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto g = detail::as_matrix(self.grad, m, n);
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Eigen::VectorXd ga(m * k);
      Eigen::Map<RowMatrix>(ga.data(), m, k).noalias() = g * detail::as_matrix(pb.value, k, n).transpose();
      detail::accumulate(pa, ga);
    }
    if (pb.requires_grad) {
      Eigen::VectorXd gb(k * n);
      Eigen::Map<RowMatrix>(gb.data(), k, n).noalias() = detail::as_matrix(pa.value, m, k).transpose() * g;
      detail::accumulate(pb, gb);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return detail::make_result("add", a.shape(), a.data() + b.data(), {a, b}, [](Node& self) {
    detail::accumulate(parent(self, 0), self.grad);
    detail::accumulate(parent(self, 1), self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return detail::make_result("sub", a.shape(), a.data() - b.data(), {a, b}, [](Node& self) {
    detail::accumulate(parent(self, 0), self.grad);
    detail::accumulate(parent(self, 1), -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return detail::make_result("mul", a.shape(), a.data().cwiseProduct(b.data()), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) detail::accumulate(pa, self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) detail::accumulate(pb, self.grad.cwiseProduct(pa.value));
  });
}

Tensor scale(const Tensor& a, double s) {
  return detail::make_result("scale", a.shape(), a.data() * s, {a},
                             [s](Node& self) { detail::accumulate(parent(self, 0), self.grad * s); });
}

Tensor relu(const Tensor& a) {
  return detail::make_result("relu", a.shape(), a.data().cwiseMax(0.0), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    detail::accumulate(p, (p.value.array() > 0.0).select(self.grad, 0.0));
  });
}

namespace {
constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

Tensor gelu(const Tensor& a) {
  const auto& x = a.data().array();
  const Eigen::ArrayXd inner = kSqrt2OverPi * (x + kGeluC * x.cube());
  Eigen::VectorXd out = (0.5 * x * (1.0 + inner.tanh())).matrix();
  return detail::make_result("gelu", a.shape(), std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    const auto& xv = p.value.array();
    const Eigen::ArrayXd t = (kSqrt2OverPi * (xv + kGeluC * xv.cube())).tanh();
    const Eigen::ArrayXd d =
        0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t.square()) * kSqrt2OverPi * (1.0 + 3.0 * kGeluC * xv.square());
    detail::accumulate(p, (self.grad.array() * d).matrix());
  });
}

Tensor softmax(const Tensor& x, Index axis) {
  const AxisView v = axis_view(x.shape(), axis, "softmax");
  const auto& in = x.data();
  Eigen::VectorXd out(in.size());
  for (Index o = 0; o < v.outer; ++o) {
    for (Index i = 0; i < v.inner; ++i) {
      const Index base = o * v.extent * v.inner + i;
      double mx = in[base];
      for (Index l = 1; l < v.extent; ++l) mx = std::max(mx, in[base + l * v.inner]);
      double z = 0;
      for (Index l = 0; l < v.extent; ++l) {
        const double e = std::exp(in[base + l * v.inner] - mx);
        out[base + l * v.inner] = e;
        z += e;
      }
      for (Index l = 0; l < v.extent; ++l) out[base + l * v.inner] /= z;
    }
  }
  return detail::make_result("softmax", x.shape(), std::move(out), {x}, [v](Node& self) {
    Eigen::VectorXd gx(self.value.size());
    const auto& y = self.value;
    const auto& g = self.grad;
    for (Index o = 0; o < v.outer; ++o) {
      for (Index i = 0; i < v.inner; ++i) {
        const Index base = o * v.extent * v.inner + i;
        double dot = 0;
        for (Index l = 0; l < v.extent; ++l) dot += g[base + l * v.inner] * y[base + l * v.inner];
        for (Index l = 0; l < v.extent; ++l) {
          const Index idx = base + l * v.inner;
          gx[idx] = y[idx] * (g[idx] - dot);
        }
      }
    }
    detail::accumulate(parent(self, 0), gx);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1) throw DimensionError("layer_norm: scalar input");
  const Index d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    throw DimensionError("layer_norm: gain/bias must have the last extent of x");
  const Index rows = x.size() / d;
  const auto xm = detail::as_matrix(x.data(), rows, d);
  RowMatrix xhat(rows, d);
  Eigen::VectorXd inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xm.row(r).array() - mu) * inv_std[r];
  }
  Eigen::VectorXd out(rows * d);
  auto om = Eigen::Map<RowMatrix>(out.data(), rows, d);
  om = (xhat.array().rowwise() * gain.data().transpose().array()).rowwise() + bias.data().transpose().array();
  return detail::make_result(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto g = detail::as_matrix(self.grad, rows, d);
        Node& px = parent(self, 0);
        Node& pg = parent(self, 1);
        Node& pb = parent(self, 2);
        if (pb.requires_grad) detail::accumulate(pb, g.colwise().sum().transpose());
        if (pg.requires_grad) detail::accumulate(pg, g.cwiseProduct(xhat).colwise().sum().transpose());
        if (px.requires_grad) {
          Eigen::VectorXd gx(rows * d);
          auto gxm = Eigen::Map<RowMatrix>(gx.data(), rows, d);
          const Eigen::RowVectorXd gamma = pg.value.transpose();
          for (Index r = 0; r < rows; ++r) {
            const Eigen::RowVectorXd gh = g.row(r).cwiseProduct(gamma);
            const double m1 = gh.mean();
            const double m2 = gh.cwiseProduct(xhat.row(r)).mean();
            gxm.row(r) = inv_std[r] * (gh.array() - m1 - xhat.row(r).array() * m2);
          }
          detail::accumulate(px, gx);
        }
      });
}

Tensor sum(const Tensor& x) {
  const Index n = x.size();
  return detail::make_result("sum", {}, Eigen::VectorXd::Constant(1, x.data().sum()), {x}, [n](Node& self) {
    detail::accumulate(parent(self, 0), Eigen::VectorXd::Constant(n, self.grad[0]));
  });
}

Tensor mean(const Tensor& x) {
  const Index n = x.size();
  return detail::make_result("mean", {}, Eigen::VectorXd::Constant(1, x.data().mean()), {x}, [n](Node& self) {
    detail::accumulate(parent(self, 0), Eigen::VectorXd::Constant(n, self.grad[0] / double(n)));
  });
}

namespace {
Tensor reduce_axis(const Tensor& x, Index axis, bool average, const char* op) {
  const AxisView v = axis_view(x.shape(), axis, op);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  const auto& in = x.data();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.outer * v.inner);
  for (Index o = 0; o < v.outer; ++o)
    for (Index l = 0; l < v.extent; ++l)
      for (Index i = 0; i < v.inner; ++i) out[o * v.inner + i] += in[(o * v.extent + l) * v.inner + i];
  const double factor = average ? 1.0 / double(v.extent) : 1.0;
  out *= factor;
  return detail::make_result(op, std::move(out_shape), std::move(out), {x}, [v, factor](Node& self) {
    Eigen::VectorXd gx(v.outer * v.extent * v.inner);
    for (Index o = 0; o < v.outer; ++o)
      for (Index l = 0; l < v.extent; ++l)
        for (Index i = 0; i < v.inner; ++i) gx[(o * v.extent + l) * v.inner + i] = self.grad[o * v.inner + i] * factor;
    detail::accumulate(parent(self, 0), gx);
  });
}
}  // namespace

Tensor sum(const Tensor& x, Index axis) { return reduce_axis(x, axis, false, "sum_axis"); }
Tensor mean(const Tensor& x, Index axis) { return reduce_axis(x, axis, true, "mean_axis"); }

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_row_bias");
  const Index r = x.rows(), n = x.cols();
  if (bias.shape() != Shape{n}) throw DimensionError("add_row_bias: bias length must equal column count");
  Eigen::VectorXd out(r * n);
  Eigen::Map<RowMatrix>(out.data(), r, n) = x.as_matrix().rowwise() + bias.data().transpose();
  return detail::make_result("add_row_bias", x.shape(), std::move(out), {x, bias}, [r, n](Node& self) {
    detail::accumulate(parent(self, 0), self.grad);
    Node& pb = parent(self, 1);
    if (pb.requires_grad) detail::accumulate(pb, detail::as_matrix(self.grad, r, n).colwise().sum().transpose());
  });
}

Tensor rows_affine(const Tensor& x, const Eigen::VectorXd& scale_v, const Eigen::VectorXd& shift_v) {
  require_rank2(x, "rows_affine");
  const Index r = x.rows(), n = x.cols();
  if (scale_v.size() != r || shift_v.size() != r) throw DimensionError("rows_affine: coefficient length must equal row count");
  Eigen::VectorXd out(r * n);
  Eigen::Map<RowMatrix>(out.data(), r, n) =
      (x.as_matrix().array().colwise() * scale_v.array()).colwise() + shift_v.array();
  return detail::make_result("rows_affine", x.shape(), std::move(out), {x}, [r, n, scale_v](Node& self) {
    Eigen::VectorXd gx(r * n);
    Eigen::Map<RowMatrix>(gx.data(), r, n) = detail::as_matrix(self.grad, r, n).array().colwise() * scale_v.array();
    detail::accumulate(parent(self, 0), gx);
  });
}

Tensor repeat_rows(const Tensor& x, Index copies) {
  require_rank2(x, "repeat_rows");
  if (copies < 1) throw DimensionError("repeat_rows: copies must be positive");
  const Index b = x.rows(), n = x.cols();
  Eigen::VectorXd out(b * copies * n);
  auto om = Eigen::Map<RowMatrix>(out.data(), b * copies, n);
  const auto xm = x.as_matrix();
  for (Index i = 0; i < b; ++i) om.middleRows(i * copies, copies).rowwise() = xm.row(i);
  return detail::make_result("repeat_rows", {b * copies, n}, std::move(out), {x}, [b, copies, n](Node& self) {
    Eigen::VectorXd gx(b * n);
    auto gm = Eigen::Map<RowMatrix>(gx.data(), b, n);
    const auto g = detail::as_matrix(self.grad, b * copies, n);
    for (Index i = 0; i < b; ++i) gm.row(i) = g.middleRows(i * copies, copies).colwise().sum();
    detail::accumulate(parent(self, 0), gx);
  });
}

Tensor gather_group_rows(const Tensor& x, Index group, std::span<const Index> choice) {
  require_rank2(x, "gather_group_rows");
  if (group < 1 || x.rows() % group != 0) throw DimensionError("gather_group_rows: rows must be a multiple of group");
  const Index b = x.rows() / group, n = x.cols();
  if (static_cast<Index>(choice.size()) != b * n) throw DimensionError("gather_group_rows: choice must be B x n");
  std::vector<Index> src(choice.size());
  Eigen::VectorXd out(b * n);
  for (Index i = 0; i < b; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index c = choice[i * n + j];
      if (c < 0 || c >= group) throw ContractError("gather_group_rows: choice out of range");
      src[i * n + j] = (i * group + c) * n + j;
      out[i * n + j] = x.data()[src[i * n + j]];
    }
  }
  const Index total = x.size();
  return detail::make_result("gather_group_rows", {b, n}, std::move(out), {x},
                             [src = std::move(src), total](Node& self) {
                               Eigen::VectorXd gx = Eigen::VectorXd::Zero(total);
                               for (std::size_t k = 0; k < src.size(); ++k) gx[src[k]] += self.grad[k];
                               detail::accumulate(parent(self, 0), gx);
                             });
}

namespace {

// gx[t] = Re( sum_j (gre_j + i gim_j) e^{+i 2 pi j t / n} ), the adjoint of
// the half-spectrum forward transform.
Eigen::VectorXd half_spectrum_adjoint(const Eigen::Ref<const Eigen::VectorXd>& gre,
                                      const Eigen::Ref<const Eigen::VectorXd>& gim, Index n) {
  std::vector<std::complex<double>> z(static_cast<std::size_t>(n));
  for (Index j = 0; j < gre.size(); ++j) z[j] = {gre[j], gim[j]};
  spectral::fft(z, true);
  Eigen::VectorXd out(n);
  for (Index t = 0; t < n; ++t) out[t] = z[t].real();
  return out;
}

Tensor rfft_part(const Tensor& x, bool imaginary) {
  require_rank2(x, "rfft_rows");
  const Index r = x.rows(), n = x.cols(), nb = spectral::half_bins(n);
  Eigen::VectorXd out(r * nb);
  const auto& xv = x.data();
  for (Index i = 0; i < r; ++i) {
    const auto s = spectral::rfft<double>(std::span<const double>(xv.data() + i * n, static_cast<std::size_t>(n)));
    out.segment(i * nb, nb) = imaginary ? s.im : s.re;
  }
  return detail::make_result(imaginary ? "rfft_im" : "rfft_re", {r, nb}, std::move(out), {x},
                             [r, n, nb, imaginary](Node& self) {
                               Eigen::VectorXd gx(r * n);
                               const Eigen::VectorXd zero = Eigen::VectorXd::Zero(nb);
                               for (Index i = 0; i < r; ++i) {
                                 const auto g = self.grad.segment(i * nb, nb);
                                 gx.segment(i * n, n) =
                                     imaginary ? half_spectrum_adjoint(zero, g, n) : half_spectrum_adjoint(g, zero, n);
                               }
                               detail::accumulate(parent(self, 0), gx);
                             });
}

}  // namespace

ComplexTensor rfft_rows(const Tensor& x) { return {rfft_part(x, false), rfft_part(x, true)}; }

Tensor irfft_rows(const Tensor& re, const Tensor& im, Index n) {
  require_rank2(re, "irfft_rows");
  require_same_shape(re, im, "irfft_rows");
  const Index r = re.rows(), nb = re.cols();
  if (n < 1 || nb != spectral::half_bins(n)) throw ContractError("irfft_rows: spectrum length inconsistent with n");
  Eigen::VectorXd out(r * n);
  spectral::ComplexSpectrum<double> s;
  s.n_time = n;
  for (Index i = 0; i < r; ++i) {
    s.re = re.data().segment(i * nb, nb);
    s.im = im.data().segment(i * nb, nb);
    out.segment(i * n, n) = spectral::irfft(s, n);
  }
  return detail::make_result("irfft", {r, n}, std::move(out), {re, im}, [r, n, nb](Node& self) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(nb, 2.0 / double(n));
    w[0] = 1.0 / double(n);
    if (n % 2 == 0) w[nb - 1] = 1.0 / double(n);
    Eigen::VectorXd gre(r * nb), gim(r * nb);
    for (Index i = 0; i < r; ++i) {
      const Eigen::VectorXd g = self.grad.segment(i * n, n);
      const auto s = spectral::rfft<double>(g);
      gre.segment(i * nb, nb) = s.re.cwiseProduct(w);
      gim.segment(i * nb, nb) = s.im.cwiseProduct(w);
    }
    detail::accumulate(parent(self, 0), gre);
    detail::accumulate(parent(self, 1), gim);
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  const Tensor d = sub(pred, target);
  return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Finite-difference checks

namespace {
double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }
}  // namespace

double grad_check(const ScalarFunction& f, const Tensor& x, double h) {
  Tensor leaf = Tensor::from(x.shape(), x.data(), true);
  const Tensor y = f(leaf);
  if (y.size() != 1) throw ContractError("grad_check: function output is not scalar");
  backward(y);
  const Eigen::VectorXd analytic = leaf.grad();
  double worst = 0;
  for (Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x.data(), xm = x.data();
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(Tensor::from(x.shape(), xp)).item();
    const double fm = f(Tensor::from(x.shape(), xm)).item();
    worst = std::max(worst, rel_err(analytic[i], (fp - fm) / (2 * h)));
  }
  return worst;
}

double grad_check(const std::function<Tensor()>& loss, std::span<Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  const Tensor y = loss();
  if (y.size() != 1) throw ContractError("grad_check: loss is not scalar");
  backward(y);
  std::vector<Eigen::VectorXd> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& data = params[k].mutable_data();
    for (Index i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = loss().item();
      data[i] = orig - h;
      const double fm = loss().item();
      data[i] = orig;
      worst = std::max(worst, rel_err(analytic[k][i], (fp - fm) / (2 * h)));
    }
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

}  // namespace refocus
