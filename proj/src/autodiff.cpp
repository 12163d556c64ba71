#include "fedclip/autodiff.hpp"

#include "fedclip/errors.hpp"

#include <cstring>
#include <sstream>

namespace fedclip {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

Eigen::Index ParameterSet::coefficient_count() const {
  Eigen::Index n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

bool same_layout(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i].rows() != b.values[i].rows() || a.values[i].cols() != b.values[i].cols()) {
      return false;
    }
  }
  return true;
}

double max_abs_difference(const ParameterSet& a, const ParameterSet& b) {
  if (!same_layout(a, b)) {
    throw DimensionError("parameter sets have different layouts");
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i].size() == 0) continue;
    diff = std::max(diff, (a.values[i] - b.values[i]).cwiseAbs().maxCoeff());
  }
  return diff;
}

bool bit_identical(const ParameterSet& a, const ParameterSet& b) {
  if (!same_layout(a, b) || a.names != b.names) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.values[i];
    const auto& y = b.values[i];
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) {
      return false;
    }
  }
  return true;
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::AddBias: return "add_bias";
    case OpKind::Relu: return "relu";
    case OpKind::RowNormalize: return "row_normalize";
    case OpKind::Scale: return "scale";
    case OpKind::Add: return "add";
    case OpKind::Transpose: return "transpose";
    case OpKind::Sum: return "sum";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::HalfSquaredDistance: return "half_squared_distance";
  }
  return "unknown";
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw ContractError("node id " + std::to_string(id.index) + " does not belong to this graph");
  }
  return nodes_[id.index];
}

const Tensor& Graph::tensor(NodeId id) const { return node(id).out; }

OpKind Graph::kind(NodeId id) const { return node(id).kind; }

std::span<const std::size_t> Graph::inputs(NodeId id) const { return node(id).inputs; }

Matrix Graph::grad(NodeId id) const {
  const auto& t = node(id).out;
  if (t.grad) return *t.grad;
  return Matrix::Zero(t.rows(), t.cols());
}

NodeId Graph::push(Node n) {
  for (std::size_t in : n.inputs) {
    if (nodes_[in].out.requires_grad) {
      n.out.requires_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.kind = OpKind::Leaf;
  n.out.values = std::move(value);
  n.out.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(av) + " x " +
                         shape_string(bv));
  }
  Node n;
  n.kind = OpKind::MatMul;
  n.inputs = {a.index, b.index};
  n.out.values = av * bv;
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("add_bias: bias " + shape_string(bv) + " does not match " +
                         shape_string(xv));
  }
  Node n;
  n.kind = OpKind::AddBias;
  n.inputs = {x.index, bias.index};
  n.out.values = xv.rowwise() + bv.row(0);
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::Relu;
  n.inputs = {x.index};
  n.out.values = value(x).cwiseMax(0.0);
  return push(std::move(n));
}

NodeId Graph::row_normalize(NodeId x) {
  const Matrix& xv = value(x);
  Node n;
  n.kind = OpKind::RowNormalize;
  n.inputs = {x.index};
  n.aux = xv.rowwise().norm();
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    if (!(n.aux(i, 0) > 1e-12)) {
      throw DegenerateInputError("row_normalize: row " + std::to_string(i) +
                                 " has near-zero norm");
    }
  }
  n.out.values = n.aux.col(0).cwiseInverse().asDiagonal() * xv;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.kind = OpKind::Scale;
  n.inputs = {x.index};
  n.factor = factor;
  n.out.values = factor * value(x);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw DimensionError("add: shapes " + shape_string(av) + " and " + shape_string(bv) +
                         " differ");
  }
  Node n;
  n.kind = OpKind::Add;
  n.inputs = {a.index, b.index};
  n.out.values = av + bv;
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId x) {
  Node n;
  n.kind = OpKind::Transpose;
  n.inputs = {x.index};
  n.out.values = value(x).transpose();
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.kind = OpKind::Sum;
  n.inputs = {x.index};
  n.out.values = Matrix::Constant(1, 1, value(x).sum());
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::span<const int> targets) {
  const Matrix& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(z));
  }
  if (z.rows() == 0) throw ContractError("softmax_cross_entropy: empty batch");
  const Matrix log_p = log_softmax_rows(z);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= z.cols()) {
      throw DataError("softmax_cross_entropy: target " + std::to_string(t) + " at row " +
                      std::to_string(i) + " out of range");
    }
    total -= log_p(i, t);
  }
  Node n;
  n.kind = OpKind::SoftmaxCrossEntropy;
  n.inputs = {logits.index};
  n.aux = log_p.array().exp().matrix();
  n.targets.assign(targets.begin(), targets.end());
  n.out.values = Matrix::Constant(1, 1, total / static_cast<double>(z.rows()));
  return push(std::move(n));
}

NodeId Graph::half_squared_distance(NodeId x, const Matrix& anchor) {
  const Matrix& xv = value(x);
  if (xv.rows() != anchor.rows() || xv.cols() != anchor.cols()) {
    throw DimensionError("half_squared_distance: shapes " + shape_string(xv) + " and " +
                         shape_string(anchor) + " differ");
  }
  Node n;
  n.kind = OpKind::HalfSquaredDistance;
  n.inputs = {x.index};
  n.aux = xv - anchor;
  n.out.values = Matrix::Constant(1, 1, 0.5 * n.aux.squaredNorm());
  return push(std::move(n));
}

void Graph::zero_grad() {
  for (auto& n : nodes_) n.out.grad.reset();
}

void Graph::accumulate(std::size_t index, const Matrix& delta) {
  Tensor& t = nodes_[index].out;
  if (!t.requires_grad) return;
  if (t.grad) {
    *t.grad += delta;
  } else {
    t.grad = delta;
  }
}

GradientMap Graph::backward(NodeId loss) {
  const Tensor& root = tensor(loss);
  if (root.rows() != 1 || root.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_string(root.values));
  }
  zero_grad();
  nodes_[loss.index].out.grad = Matrix::Ones(1, 1);

  for (std::size_t k = loss.index + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.out.requires_grad || !n.out.grad) continue;
    const Matrix& up = *n.out.grad;
    switch (n.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul: {
        const Matrix& a = nodes_[n.inputs[0]].out.values;
        const Matrix& b = nodes_[n.inputs[1]].out.values;
        if (nodes_[n.inputs[0]].out.requires_grad) accumulate(n.inputs[0], up * b.transpose());
        if (nodes_[n.inputs[1]].out.requires_grad) accumulate(n.inputs[1], a.transpose() * up);
        break;
      }
      case OpKind::AddBias:
        accumulate(n.inputs[0], up);
        accumulate(n.inputs[1], up.colwise().sum());
        break;
      case OpKind::Relu: {
        const Matrix& x = nodes_[n.inputs[0]].out.values;
        accumulate(n.inputs[0], (x.array() > 0.0).select(up, 0.0));
        break;
      }
      case OpKind::RowNormalize: {
        // y = x/|x|  =>  dx = (dy - y <y, dy>) / |x|
        const Matrix& y = n.out.values;
        const Vector along = (y.array() * up.array()).rowwise().sum();
        Matrix dx = up - along.asDiagonal() * y;
        dx = n.aux.col(0).cwiseInverse().asDiagonal() * dx;
        accumulate(n.inputs[0], dx);
        break;
      }
      case OpKind::Scale:
        accumulate(n.inputs[0], n.factor * up);
        break;
      case OpKind::Add:
        accumulate(n.inputs[0], up);
        accumulate(n.inputs[1], up);
        break;
      case OpKind::Transpose:
        accumulate(n.inputs[0], up.transpose());
        break;
      case OpKind::Sum: {
        const Matrix& x = nodes_[n.inputs[0]].out.values;
        accumulate(n.inputs[0], Matrix::Constant(x.rows(), x.cols(), up(0, 0)));
        break;
      }
      case OpKind::SoftmaxCrossEntropy: {
        Matrix dz = n.aux;
        for (std::size_t i = 0; i < n.targets.size(); ++i) {
          dz(static_cast<Eigen::Index>(i), n.targets[i]) -= 1.0;
        }
        dz *= up(0, 0) / static_cast<double>(dz.rows());
        accumulate(n.inputs[0], dz);
        break;
      }
      case OpKind::HalfSquaredDistance:
        accumulate(n.inputs[0], up(0, 0) * n.aux);
        break;
    }
  }

  GradientMap grads;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    if (n.kind == OpKind::Leaf && n.out.requires_grad) {
      grads.emplace(k, n.out.grad ? *n.out.grad : Matrix::Zero(n.out.rows(), n.out.cols()));
    }
  }
  return grads;
}

}  // namespace fedclip
