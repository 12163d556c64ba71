#include "fedclip/gradcheck.hpp"

#include "fedclip/errors.hpp"

#include <algorithm>

namespace fedclip {

std::vector<Matrix> finite_difference_grad(const ScalarFunction& f, std::vector<Matrix> params,
                                           double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_grad: eps must be positive");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (auto& p : params) grads.push_back(Matrix::Zero(p.rows(), p.cols()));

  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      double& x = params[k].data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = f(params);
      x = saved - eps;
      const double down = f(params);
      x = saved;
      grads[k].data()[i] = (up - down) / (2.0 * eps);
    }
  }
  return grads;
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("relative_error: shapes " + shape_string(a) + " and " + shape_string(b) +
                         " differ");
  }
  if (a.size() == 0) return 0.0;
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace fedclip
