#include "fedclip/optim.hpp"

#include "fedclip/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace fedclip {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::Adadelta: return "adadelta";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto kind : {OptimizerKind::SGD, OptimizerKind::Adam, OptimizerKind::AdamW,
                    OptimizerKind::Adagrad, OptimizerKind::Adadelta}) {
    if (to_string(kind) == lower) return kind;
  }
  throw ConfigError("unknown optimizer '" + name + "'");
}

void validate(const OptimizerSpec& spec) {
  if (!(spec.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(spec.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (!(spec.eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (spec.betas) {
    const auto [b1, b2] = *spec.betas;
    if (!(b1 >= 0.0 && b1 < 1.0) || !(b2 >= 0.0 && b2 < 1.0)) {
      throw ConfigError("optimizer.betas must lie in [0, 1)");
    }
  }
  if (spec.rho && !(*spec.rho >= 0.0 && *spec.rho < 1.0)) {
    throw ConfigError("optimizer.rho must lie in [0, 1)");
  }
  if (spec.momentum && !(*spec.momentum >= 0.0 && *spec.momentum < 1.0)) {
    throw ConfigError("optimizer.momentum must lie in [0, 1)");
  }
  const bool adam = spec.kind == OptimizerKind::Adam || spec.kind == OptimizerKind::AdamW;
  if (adam != spec.betas.has_value()) {
    throw ConfigError("optimizer.betas applies to adam/adamw only");
  }
  if ((spec.kind == OptimizerKind::Adadelta) != spec.rho.has_value()) {
    throw ConfigError("optimizer.rho applies to adadelta only");
  }
  if ((spec.kind == OptimizerKind::SGD) != spec.momentum.has_value()) {
    throw ConfigError("optimizer.momentum applies to sgd only");
  }
}

OptimizerSpec make_optimizer(OptimizerKind kind, const OptimizerOverrides& overrides) {
  OptimizerSpec s;
  s.kind = kind;
  switch (kind) {
    case OptimizerKind::SGD:
      s.lr = 0.01;
      s.weight_decay = 0.0005;
      s.eps = 1e-8;
      s.momentum = 0.9;
      break;
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW:
      s.lr = 0.001;
      s.weight_decay = 0.02;
      s.betas = {0.9, 0.98};
      s.eps = 1e-8;
      break;
    case OptimizerKind::Adagrad:
      s.lr = 0.001;
      s.weight_decay = 0.0005;
      s.eps = 1e-10;
      break;
    case OptimizerKind::Adadelta:
      s.lr = 0.001;
      s.weight_decay = 0.0005;
      s.eps = 1e-6;
      s.rho = 0.9;
      break;
  }
  if (overrides.lr) s.lr = *overrides.lr;
  if (overrides.weight_decay) s.weight_decay = *overrides.weight_decay;
  if (overrides.eps) s.eps = *overrides.eps;
  if (overrides.betas) s.betas = overrides.betas;
  if (overrides.rho) s.rho = overrides.rho;
  if (overrides.momentum) s.momentum = overrides.momentum;
  validate(s);
  return s;
}

namespace {

std::vector<Matrix> zeros_like(const ParameterSet& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params.values) out.push_back(Matrix::Zero(p.rows(), p.cols()));
  return out;
}

void ensure_slots(std::vector<Matrix>& slots, const ParameterSet& params) {
  if (slots.empty()) {
    slots = zeros_like(params);
    return;
  }
  if (slots.size() != params.size()) throw DimensionError("optimizer state does not match parameters");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].rows() != params.values[i].rows() || slots[i].cols() != params.values[i].cols()) {
      throw DimensionError("optimizer slot for '" + params.names[i] + "' has the wrong shape");
    }
  }
}

}  // namespace

void step(const OptimizerSpec& spec, OptimizerState& state, ParameterSet& params,
          std::span<const Matrix> grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("optimizer step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params.values[i].rows() || grads[i].cols() != params.values[i].cols()) {
      throw DimensionError("optimizer step: gradient of '" + params.names[i] + "' is " +
                           shape_string(grads[i]) + ", parameter is " + shape_string(params.values[i]));
    }
    if (!grads[i].allFinite()) {
      throw NumericError("optimizer step: non-finite gradient for parameter '" + params.names[i] + "'");
    }
  }

  const double lr = spec.lr;
  const double wd = spec.weight_decay;
  const std::int64_t t = state.step_count + 1;

  switch (spec.kind) {
    case OptimizerKind::SGD: {
      const double mu = spec.momentum.value_or(0.0);
      if (mu > 0.0) ensure_slots(state.momentum_buffer, params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params.values[i];
        Matrix g = grads[i];
        if (wd != 0.0) g += wd * w;
        if (mu > 0.0) {
          Matrix& buf = state.momentum_buffer[i];
          buf = t == 1 ? g : Matrix(mu * buf + g);
          w -= lr * buf;
        } else {
          w -= lr * g;
        }
      }
      break;
    }
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW: {
      const auto [beta1, beta2] = spec.betas.value_or(std::pair{0.9, 0.98});
      const bool decoupled = spec.kind == OptimizerKind::AdamW;
      ensure_slots(state.first_moment, params);
      ensure_slots(state.second_moment, params);
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params.values[i];
        Matrix g = grads[i];
        if (!decoupled && wd != 0.0) g += wd * w;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
        const Matrix update =
            ((m / corr1).array() / ((v / corr2).array().sqrt() + spec.eps)).matrix();
        if (decoupled && wd != 0.0) w -= lr * wd * w;
        w -= lr * update;
      }
      break;
    }
    case OptimizerKind::Adagrad: {
      ensure_slots(state.second_moment, params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params.values[i];
        Matrix g = grads[i];
        if (wd != 0.0) g += wd * w;
        Matrix& sum = state.second_moment[i];
        sum += g.cwiseAbs2();
        w -= lr * (g.array() / (sum.array().sqrt() + spec.eps)).matrix();
      }
      break;
    }
    case OptimizerKind::Adadelta: {
      const double rho = spec.rho.value_or(0.9);
      ensure_slots(state.second_moment, params);
      ensure_slots(state.accumulated_delta, params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params.values[i];
        Matrix g = grads[i];
        if (wd != 0.0) g += wd * w;
        Matrix& sq = state.second_moment[i];
        Matrix& acc = state.accumulated_delta[i];
        sq = rho * sq + (1.0 - rho) * g.cwiseAbs2();
        const Matrix delta =
            ((acc.array() + spec.eps).sqrt() / (sq.array() + spec.eps).sqrt() * g.array()).matrix();
        acc = rho * acc + (1.0 - rho) * delta.cwiseAbs2();
        w -= lr * delta;
      }
      break;
    }
  }
  state.step_count = t;
}

}  // namespace fedclip
