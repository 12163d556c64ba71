#pragma once

#include "fedclip/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedclip {

enum class OptimizerKind { SGD, Adam, AdamW, Adagrad, Adadelta };

std::string to_string(OptimizerKind kind);
/// Case-insensitive; throws ConfigError on unknown names.
OptimizerKind parse_optimizer_kind(const std::string& name);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::SGD;
  double lr = 0.01;
  double weight_decay = 0.0;
  std::optional<std::pair<double, double>> betas;  // Adam, AdamW
  double eps = 1e-8;
  std::optional<double> rho;       // Adadelta
  std::optional<double> momentum;  // SGD
};

struct OptimizerOverrides {
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<std::pair<double, double>> betas;
  std::optional<double> eps;
  std::optional<double> rho;
  std::optional<double> momentum;
};

/// Defaults per optimizer kind:
///
///   kind      lr      wd      betas        eps    extra
///   SGD       0.01    5e-4    -            -      momentum 0.9
///   Adam      0.001   0.02    (0.9,0.98)   1e-8
///   AdamW     0.001   0.02    (0.9,0.98)   1e-8
///   Adagrad   0.001   5e-4    -            1e-10
///   Adadelta  0.001   5e-4    -            1e-6   rho 0.9
///
/// Overrides that do not apply to `kind` (e.g. betas for SGD) are rejected.
OptimizerSpec make_optimizer(OptimizerKind kind, const OptimizerOverrides& overrides = {});

void validate(const OptimizerSpec& spec);

/// Per-parameter slots. Only the slots the kind needs are populated.
struct OptimizerState {
  std::int64_t step_count = 0;
  std::vector<Matrix> first_moment;        // Adam/AdamW m
  std::vector<Matrix> second_moment;       // Adam/AdamW v, Adagrad sum, Adadelta E[g²]
  std::vector<Matrix> accumulated_delta;   // Adadelta E[Δ²]
  std::vector<Matrix> momentum_buffer;     // SGD
};

/// One update of `params` from `grads`.
///
/// Adam folds weight decay into the gradient (coupled L2); AdamW shrinks the
/// weights by lr·wd·w separately from the adaptive step. SGD, Adagrad and
/// Adadelta also use coupled decay. Throws NumericError naming the parameter
/// when a gradient is not finite; in that case nothing is modified.
void step(const OptimizerSpec& spec, OptimizerState& state, ParameterSet& params,
          std::span<const Matrix> grads);

}  // namespace fedclip
