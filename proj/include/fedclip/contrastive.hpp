#pragma once

#include "fedclip/autodiff.hpp"
#include "fedclip/models.hpp"

#include <span>
#include <vector>

namespace fedclip {

inline constexpr double kDefaultTemperature = 0.07;

struct ContrastiveConfig {
  double temperature = kDefaultTemperature;
};

void validate(const ContrastiveConfig& cfg);

/// Cosine similarity of every image row against every text row (B×N).
Matrix similarity(const Matrix& img_emb, const Matrix& text_emb);
NodeId similarity(Graph& graph, NodeId img_emb, NodeId text_emb);

struct Classification {
  Matrix probabilities;  // B×K, rows sum to 1
  std::vector<int> labels;
};

/// p(c | x_j) = softmax_c(s_jc / τ) against the class anchors; ties in the
/// argmax go to the lowest class index.
Classification classify(const Matrix& img_emb, const TextEmbeddingTable& table,
                        const ContrastiveConfig& cfg);

/// Row index of the maximum, lowest index on ties.
std::vector<int> argmax_rows(const Matrix& scores);

/// Symmetric image/text batch loss. `paired_text` row j is the anchor of
/// image j; only the diagonal of S counts as positive. The text side enters
/// the graph as a constant.
NodeId contrastive_loss(Graph& graph, NodeId img_emb, const Matrix& paired_text,
                        const ContrastiveConfig& cfg);

/// Cross-entropy of the anchor-softmax probabilities against labels.
NodeId anchor_cross_entropy(Graph& graph, NodeId img_emb, const TextEmbeddingTable& table,
                            std::span<const int> labels, const ContrastiveConfig& cfg);

/// Graph-free evaluation of the batch loss with its intermediate matrices.
struct ContrastiveTerms {
  Matrix similarity;  // S, B×B
  Matrix image_probs; // P = softmax(S/τ)
  Matrix text_probs;  // Q = softmax(Sᵀ/τ)
  double loss = 0.0;
};

ContrastiveTerms contrastive_terms(const Matrix& img_emb, const Matrix& paired_text,
                                   const ContrastiveConfig& cfg);

}  // namespace fedclip
