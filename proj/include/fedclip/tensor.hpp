#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedclip {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Dense row-major-semantics array of doubles with an optional gradient slot.
/// Everything in this library is rank 2; vectors are 1×n rows.
struct Tensor {
  Matrix values;
  bool requires_grad = false;
  std::optional<Matrix> grad;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  std::vector<Eigen::Index> shape() const { return {values.rows(), values.cols()}; }
};

std::string shape_string(const Matrix& m);

/// Numerically stable row-wise softmax (per-row max subtraction).
template <typename Derived>
Matrix softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Derived>
Matrix log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - peak).eval();
    out.row(i) = (shifted - std::log(shifted.exp().sum())).matrix();
  }
  return out;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Named, ordered list of parameter arrays. The unit that optimizers step on
/// and that crosses the client/server boundary.
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix> values;

  std::size_t size() const { return values.size(); }
  Eigen::Index coefficient_count() const;
};

bool same_layout(const ParameterSet& a, const ParameterSet& b);
double max_abs_difference(const ParameterSet& a, const ParameterSet& b);
bool bit_identical(const ParameterSet& a, const ParameterSet& b);

}  // namespace fedclip
