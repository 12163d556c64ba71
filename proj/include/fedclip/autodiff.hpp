#pragma once

#include "fedclip/tensor.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace fedclip {

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class OpKind {
  Leaf,
  MatMul,
  AddBias,
  Relu,
  RowNormalize,
  Scale,
  Add,
  Transpose,
  Sum,
  SoftmaxCrossEntropy,
  HalfSquaredDistance,
};

const char* op_name(OpKind kind);

/// Leaf node index → gradient of the loss w.r.t. that leaf.
using GradientMap = std::map<std::size_t, Matrix>;

/// Tape of operations recorded during one forward pass.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction and backward() is a single reverse sweep. A graph
/// is meant to be built for one batch and thrown away.
class Graph {
 public:
  NodeId leaf(Matrix value, bool requires_grad = false);
  NodeId constant(Matrix value) { return leaf(std::move(value), false); }

  NodeId matmul(NodeId a, NodeId b);
  /// x[m×n] + bias[1×n] broadcast over rows.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId relu(NodeId x);
  /// Scales every row to unit L2 norm. Rows with norm <= 1e-12 are rejected.
  NodeId row_normalize(NodeId x);
  NodeId scale(NodeId x, double factor);
  NodeId add(NodeId a, NodeId b);
  NodeId transpose(NodeId x);
  NodeId sum(NodeId x);
  /// Mean over rows of -log softmax(logits_i)[targets_i]. Returns 1×1.
  NodeId softmax_cross_entropy(NodeId logits, std::span<const int> targets);
  /// 0.5 * ||x - anchor||², anchor held constant. Returns 1×1.
  NodeId half_squared_distance(NodeId x, const Matrix& anchor);

  /// Reverse sweep from a 1×1 node. Resets and refills every grad slot;
  /// gradients of leaves reached through several paths are summed.
  GradientMap backward(NodeId loss);

  const Tensor& tensor(NodeId id) const;
  const Matrix& value(NodeId id) const { return tensor(id).values; }
  /// Gradient of the last backward() w.r.t. a node; zeros if unreached.
  Matrix grad(NodeId id) const;
  OpKind kind(NodeId id) const;
  std::span<const std::size_t> inputs(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  void zero_grad();

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    Tensor out;
    Matrix aux;
    std::vector<int> targets;
    double factor = 0.0;
  };

  const Node& node(NodeId id) const;
  NodeId push(Node node);
  void accumulate(std::size_t index, const Matrix& delta);

  std::vector<Node> nodes_;
};

}  // namespace fedclip
