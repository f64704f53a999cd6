#pragma once

// Building blocks for defining differentiable ops outside tensor.cpp.

#include "refocus/tensor.hpp"

#include <cstdint>

namespace refocus::detail {

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;  // empty until something flows in
  bool requires_grad = false;
  std::uint64_t seq = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents.
  std::function<void(Node&)> backward;
};

Index shape_size(const Shape& shape);

/// Creates the output node of an op. Checks finiteness (naming `op` on
/// failure) and drops the graph edges when no input needs a gradient.
Tensor make_result(const char* op, Shape shape, Eigen::VectorXd value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);

/// Adds g into n.grad when n participates in differentiation.
void accumulate(Node& n, const Eigen::Ref<const Eigen::VectorXd>& g);

inline Eigen::Map<const RowMatrix> as_matrix(const Eigen::VectorXd& v, Index rows, Index cols) {
  return {v.data(), rows, cols};
}

}  // namespace refocus::detail
