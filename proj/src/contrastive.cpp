#include "fedclip/contrastive.hpp"

#include "fedclip/errors.hpp"

#include <cmath>
#include <numeric>

namespace fedclip {

void validate(const ContrastiveConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw ConfigError("contrastive.temperature must be a positive finite number");
  }
}

namespace {

Matrix normalized_rows(const Matrix& m, const char* what) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 1e-12)) {
      throw DegenerateInputError(std::string(what) + ": row " + std::to_string(i) +
                                 " has near-zero norm");
    }
    out.row(i) = m.row(i) / n;
  }
  return out;
}

void check_widths(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("similarity: embedding widths differ, " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

}  // namespace

Matrix similarity(const Matrix& img_emb, const Matrix& text_emb) {
  check_widths(img_emb, text_emb);
  return normalized_rows(img_emb, "image embedding") *
         normalized_rows(text_emb, "text embedding").transpose();
}

NodeId similarity(Graph& graph, NodeId img_emb, NodeId text_emb) {
  check_widths(graph.value(img_emb), graph.value(text_emb));
  const NodeId img_unit = graph.row_normalize(img_emb);
  const NodeId text_unit = graph.row_normalize(text_emb);
  return graph.matmul(img_unit, graph.transpose(text_unit));
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Classification classify(const Matrix& img_emb, const TextEmbeddingTable& table,
                        const ContrastiveConfig& cfg) {
  validate(cfg);
  const Matrix s = similarity(img_emb, table.embeddings());
  Classification out;
  // Predictions come from the similarities themselves so that they cannot
  // depend on τ through rounding in exp().
  out.labels = argmax_rows(s);
  out.probabilities = softmax_rows(s / cfg.temperature);
  return out;
}

NodeId contrastive_loss(Graph& graph, NodeId img_emb, const Matrix& paired_text,
                        const ContrastiveConfig& cfg) {
  validate(cfg);
  const Eigen::Index rows = graph.value(img_emb).rows();
  if (rows == 0) throw ContractError("contrastive_loss: empty batch");
  if (paired_text.rows() != rows) {
    throw DimensionError("contrastive_loss: " + shape_string(graph.value(img_emb)) +
                         " images paired with " + shape_string(paired_text) + " texts");
  }
  const NodeId text = graph.constant(paired_text);
  const NodeId logits = graph.scale(similarity(graph, img_emb, text), 1.0 / cfg.temperature);
  std::vector<int> diagonal(static_cast<std::size_t>(rows));
  std::iota(diagonal.begin(), diagonal.end(), 0);
  const NodeId image_side = graph.softmax_cross_entropy(logits, diagonal);
  const NodeId text_side = graph.softmax_cross_entropy(graph.transpose(logits), diagonal);
  return graph.scale(graph.add(image_side, text_side), 0.5);
}

NodeId anchor_cross_entropy(Graph& graph, NodeId img_emb, const TextEmbeddingTable& table,
                            std::span<const int> labels, const ContrastiveConfig& cfg) {
  validate(cfg);
  const NodeId anchors = graph.constant(table.embeddings());
  const NodeId logits = graph.scale(similarity(graph, img_emb, anchors), 1.0 / cfg.temperature);
  return graph.softmax_cross_entropy(logits, labels);
}

ContrastiveTerms contrastive_terms(const Matrix& img_emb, const Matrix& paired_text,
                                   const ContrastiveConfig& cfg) {
  validate(cfg);
  if (img_emb.rows() == 0) throw ContractError("contrastive_terms: empty batch");
  if (paired_text.rows() != img_emb.rows()) {
    throw DimensionError("contrastive_terms: " + shape_string(img_emb) + " images paired with " +
                         shape_string(paired_text) + " texts");
  }
  ContrastiveTerms t;
  t.similarity = similarity(img_emb, paired_text);
  const Matrix logits = t.similarity / cfg.temperature;
  t.image_probs = softmax_rows(logits);
  t.text_probs = softmax_rows(logits.transpose());
  const Matrix log_p = log_softmax_rows(logits);
  const Matrix log_q = log_softmax_rows(logits.transpose());
  double acc = 0.0;
  for (Eigen::Index j = 0; j < logits.rows(); ++j) acc += 0.5 * (log_p(j, j) + log_q(j, j));
  t.loss = -acc / static_cast<double>(logits.rows());
  return t;
}

}  // namespace fedclip
