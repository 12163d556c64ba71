#include "fedclip/models.hpp"

#include "fedclip/errors.hpp"
#include "fedclip/seeding.hpp"

#include <cmath>
#include <set>

namespace fedclip {

std::vector<int> EncoderModel::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(input_dim());
  for (const auto& l : layers) w.push_back(static_cast<int>(l.weight.cols()));
  return w;
}

EncoderModel init_encoder(std::span<const int> layer_widths, int embed_dim, std::uint64_t seed) {
  if (layer_widths.empty()) throw ConfigError("init_encoder: at least one layer width is required");
  if (embed_dim <= 0) throw ConfigError("init_encoder: embed_dim must be positive");
  for (int w : layer_widths) {
    if (w <= 0) throw ConfigError("init_encoder: layer widths must be positive");
  }

  EncoderModel model;
  model.embed_dim = embed_dim;
  model.seed = seed;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<int> dims(layer_widths.begin(), layer_widths.end());
  dims.push_back(embed_dim);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    DenseLayer layer;
    layer.weight.resize(dims[i], dims[i + 1]);
    for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = bound * unit(rng);
    layer.bias = Matrix::Zero(1, dims[i + 1]);
    layer.activation = (i + 2 == dims.size()) ? Activation::Identity : Activation::Relu;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Matrix encode_images(const EncoderModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim()) {
    throw DimensionError("encode_images: batch " + shape_string(batch) + " does not match input width " +
                         std::to_string(model.input_dim()));
  }
  Matrix h = batch;
  for (const auto& layer : model.layers) {
    Matrix z = h * layer.weight;
    z.rowwise() += layer.bias.row(0);
    h = layer.activation == Activation::Relu ? Matrix(z.cwiseMax(0.0)) : z;
  }
  return h;
}

EncoderNodes encode_images(Graph& graph, const EncoderModel& model, NodeId batch) {
  if (graph.value(batch).cols() != model.input_dim()) {
    throw DimensionError("encode_images: batch " + shape_string(graph.value(batch)) +
                         " does not match input width " + std::to_string(model.input_dim()));
  }
  EncoderNodes nodes;
  NodeId h = batch;
  for (const auto& layer : model.layers) {
    const NodeId w = graph.leaf(layer.weight, true);
    const NodeId b = graph.leaf(layer.bias, true);
    nodes.params.push_back(w);
    nodes.params.push_back(b);
    h = graph.add_bias(graph.matmul(h, w), b);
    if (layer.activation == Activation::Relu) h = graph.relu(h);
  }
  nodes.output = h;
  return nodes;
}

ParameterSet parameters(const EncoderModel& model) {
  ParameterSet p;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    p.names.push_back(prefix + ".weight");
    p.values.push_back(model.layers[i].weight);
    p.names.push_back(prefix + ".bias");
    p.values.push_back(model.layers[i].bias);
  }
  return p;
}

void set_parameters(EncoderModel& model, const ParameterSet& params) {
  if (params.size() != 2 * model.layers.size()) {
    throw DimensionError("set_parameters: expected " + std::to_string(2 * model.layers.size()) +
                         " arrays, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& layer = model.layers[i];
    const Matrix& w = params.values[2 * i];
    const Matrix& b = params.values[2 * i + 1];
    if (w.rows() != layer.weight.rows() || w.cols() != layer.weight.cols() ||
        b.rows() != layer.bias.rows() || b.cols() != layer.bias.cols()) {
      throw DimensionError("set_parameters: layer " + std::to_string(i) + " shape mismatch");
    }
    layer.weight = w;
    layer.bias = b;
  }
}

std::string render_prompt(const std::string& prompt_template, const std::string& class_name) {
  static const std::string kSlot = "{class}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = prompt_template.find(kSlot, pos);
    if (hit == std::string::npos) break;
    out.append(prompt_template, pos, hit - pos);
    out += class_name;
    pos = hit + kSlot.size();
  }
  out.append(prompt_template, pos, std::string::npos);
  return out;
}

TextEmbeddingTable::TextEmbeddingTable(std::vector<std::string> class_names, std::string prompt_template,
                                       std::uint64_t requested_seed, std::uint64_t effective_seed,
                                       Matrix embeddings)
    : class_names_(std::move(class_names)),
      prompt_template_(std::move(prompt_template)),
      requested_seed_(requested_seed),
      effective_seed_(effective_seed),
      embeddings_(std::move(embeddings)) {}

Matrix TextEmbeddingTable::rows_for(std::span<const int> labels) const {
  Matrix out(static_cast<Eigen::Index>(labels.size()), embeddings_.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= num_classes()) {
      throw DataError("label " + std::to_string(c) + " at position " + std::to_string(i) +
                      " is outside the text table");
    }
    out.row(static_cast<Eigen::Index>(i)) = embeddings_.row(c);
  }
  return out;
}

double max_pairwise_abs_cosine(const Matrix& unit_rows) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < unit_rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < unit_rows.rows(); ++j) {
      worst = std::max(worst, std::abs(unit_rows.row(i).dot(unit_rows.row(j))));
    }
  }
  return worst;
}

namespace {

Matrix draw_anchors(const std::vector<std::string>& class_names, const std::string& prompt_template,
                    int embed_dim, std::uint64_t seed) {
  Matrix table(static_cast<Eigen::Index>(class_names.size()), embed_dim);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const std::string prompt = render_prompt(prompt_template, class_names[c]);
    Rng rng(mix64(fnv1a64(prompt) ^ mix64(seed)));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto row = table.row(static_cast<Eigen::Index>(c));
    for (Eigen::Index d = 0; d < embed_dim; ++d) row(d) = normal(rng);
    row /= row.norm();
  }
  return table;
}

}  // namespace

TextEmbeddingTable build_text_table(const std::vector<std::string>& class_names,
                                    const std::string& prompt_template, int embed_dim,
                                    std::uint64_t seed) {
  if (class_names.size() < 2) throw ConfigError("build_text_table: at least two classes are required");
  if (embed_dim <= 0) throw ConfigError("build_text_table: embed_dim must be positive");
  std::set<std::string> seen;
  for (const auto& name : class_names) {
    if (!seen.insert(name).second) {
      throw ConfigError("build_text_table: duplicate class name '" + name + "'");
    }
  }

  std::uint64_t effective = seed;
  Matrix anchors = draw_anchors(class_names, prompt_template, embed_dim, effective);
  if (embed_dim >= kAnchorCheckMinDim) {
    for (int retry = 0; retry < kAnchorRetries && max_pairwise_abs_cosine(anchors) >= kMaxAnchorCosine;
         ++retry) {
      ++effective;
      anchors = draw_anchors(class_names, prompt_template, embed_dim, effective);
    }
  }
  return TextEmbeddingTable(class_names, prompt_template, seed, effective, std::move(anchors));
}

}  // namespace fedclip
