#pragma once

#include "fedclip/contrastive.hpp"
#include "fedclip/data.hpp"
#include "fedclip/models.hpp"
#include "fedclip/optim.hpp"
#include "fedclip/seeding.hpp"

#include <span>
#include <string>
#include <vector>

namespace fedclip {

enum class LossKind { Contrastive, CrossEntropy };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

/// What a training batch is scored against.
struct LossSetup {
  LossKind kind = LossKind::Contrastive;
  const TextEmbeddingTable* table = nullptr;
  ContrastiveConfig contrastive;
};

/// FedProx pull (mu/2)·|w - anchor|² added to every batch loss.
struct ProximalTerm {
  const ParameterSet* anchor = nullptr;
  double mu = 0.0;
};

/// Loss of one batch and its gradient w.r.t. every encoder parameter. The
/// returned loss excludes the proximal term.
double batch_gradients(const EncoderModel& model, const Matrix& inputs, std::span<const int> labels,
                       const LossSetup& loss, const ProximalTerm* proximal, std::vector<Matrix>& grads);

struct EpochStats {
  double mean_loss = 0.0;
  int steps = 0;
};

/// One shuffled pass of minibatch training; the last batch may be short.
EpochStats train_epoch(EncoderModel& model, const OptimizerSpec& spec, OptimizerState& state,
                       const Dataset& data, int batch_size, Rng& rng, const LossSetup& loss,
                       const ProximalTerm* proximal = nullptr);

/// Mean per-sample -log p(y|x) under the anchor softmax.
double anchor_loss(const Matrix& embeddings, std::span<const int> labels, const TextEmbeddingTable& table,
                   const ContrastiveConfig& cfg);
std::vector<double> anchor_sample_losses(const Matrix& embeddings, std::span<const int> labels,
                                         const TextEmbeddingTable& table, const ContrastiveConfig& cfg);

}  // namespace fedclip
