#pragma once

#include "fedclip/tensor.hpp"

#include <functional>
#include <span>
#include <vector>

namespace fedclip {

using ScalarFunction = std::function<double(std::span<const Matrix>)>;

/// Central differences (f(p + eps e) - f(p - eps e)) / 2eps per coordinate.
std::vector<Matrix> finite_difference_grad(const ScalarFunction& f, std::vector<Matrix> params,
                                           double eps = 1e-5);

/// max|a - b| / max(max|a|, max|b|, floor). The floor keeps all-zero
/// gradients from producing 0/0.
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

}  // namespace fedclip
