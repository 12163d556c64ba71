#include "fedclip/training.hpp"

#include "fedclip/errors.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace fedclip {

std::string to_string(LossKind kind) {
  return kind == LossKind::Contrastive ? "contrastive" : "cross_entropy";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "contrastive") return LossKind::Contrastive;
  if (name == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("unknown loss '" + name + "' (expected contrastive or cross_entropy)");
}

double batch_gradients(const EncoderModel& model, const Matrix& inputs, std::span<const int> labels,
                       const LossSetup& loss, const ProximalTerm* proximal, std::vector<Matrix>& grads) {
  if (loss.table == nullptr) throw ContractError("batch_gradients: no text table");
  Graph graph;
  const NodeId batch = graph.constant(inputs);
  const EncoderNodes enc = encode_images(graph, model, batch);
  NodeId objective = loss.kind == LossKind::Contrastive
                         ? contrastive_loss(graph, enc.output, loss.table->rows_for(labels), loss.contrastive)
                         : anchor_cross_entropy(graph, enc.output, *loss.table, labels, loss.contrastive);
  const double task_loss = graph.value(objective)(0, 0);

  if (proximal != nullptr && proximal->mu != 0.0) {
    const ParameterSet& anchor = *proximal->anchor;
    if (anchor.size() != enc.params.size()) throw DimensionError("proximal anchor does not match the model");
    NodeId pull = graph.half_squared_distance(enc.params[0], anchor.values[0]);
    for (std::size_t i = 1; i < enc.params.size(); ++i) {
      pull = graph.add(pull, graph.half_squared_distance(enc.params[i], anchor.values[i]));
    }
    objective = graph.add(objective, graph.scale(pull, proximal->mu));
  }

  const GradientMap map = graph.backward(objective);
  grads.clear();
  for (const NodeId p : enc.params) grads.push_back(map.at(p.index));
  return task_loss;
}

EpochStats train_epoch(EncoderModel& model, const OptimizerSpec& spec, OptimizerState& state,
                       const Dataset& data, int batch_size, Rng& rng, const LossSetup& loss,
                       const ProximalTerm* proximal) {
  if (data.size() == 0) throw ConfigError("train_epoch: training split is empty");
  if (batch_size < 1) throw ConfigError("train_epoch: batch_size must be >= 1");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  double loss_sum = 0.0;
  ParameterSet params = parameters(model);
  std::vector<Matrix> grads;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t count = std::min(bs, order.size() - start);
    Matrix inputs(static_cast<Eigen::Index>(count), data.inputs.cols());
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = order[start + i];
      inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(static_cast<Eigen::Index>(r));
      labels[i] = data.labels[r];
    }
    loss_sum += batch_gradients(model, inputs, labels, loss, proximal, grads);
    step(spec, state, params, grads);
    set_parameters(model, params);
    ++stats.steps;
  }
  stats.mean_loss = loss_sum / static_cast<double>(stats.steps);
  if (!std::isfinite(stats.mean_loss)) throw NumericError("training loss is not finite");
  return stats;
}

std::vector<double> anchor_sample_losses(const Matrix& embeddings, std::span<const int> labels,
                                         const TextEmbeddingTable& table, const ContrastiveConfig& cfg) {
  validate(cfg);
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw DimensionError("anchor_sample_losses: embedding/label count mismatch");
  }
  const Matrix log_p = log_softmax_rows(similarity(embeddings, table.embeddings()) / cfg.temperature);
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = -log_p(static_cast<Eigen::Index>(i), labels[i]);
  return out;
}

double anchor_loss(const Matrix& embeddings, std::span<const int> labels, const TextEmbeddingTable& table,
                   const ContrastiveConfig& cfg) {
  const auto losses = anchor_sample_losses(embeddings, labels, table, cfg);
  if (losses.empty()) throw ContractError("anchor_loss: no samples");
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

}  // namespace fedclip
