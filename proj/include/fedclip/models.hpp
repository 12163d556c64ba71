#pragma once

#include "fedclip/autodiff.hpp"
#include "fedclip/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedclip {

enum class Activation { Relu, Identity };

struct DenseLayer {
  Matrix weight;  // in × out
  Matrix bias;    // 1 × out
  Activation activation = Activation::Relu;
};

/// MLP image encoder. Hidden layers use ReLU; the last layer is linear and
/// emits the embed_dim-wide image feature.
struct EncoderModel {
  std::vector<DenseLayer> layers;
  int embed_dim = 0;
  std::uint64_t seed = 0;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.rows()); }
  /// Input width followed by every layer's output width.
  std::vector<int> widths() const;
};

/// `layer_widths` holds the input width and any hidden widths; a final
/// linear layer maps the last of them to `embed_dim`. Weights are
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
EncoderModel init_encoder(std::span<const int> layer_widths, int embed_dim, std::uint64_t seed);

/// Plain forward pass: B×d_in → B×embed_dim, unnormalized.
Matrix encode_images(const EncoderModel& model, const Matrix& batch);

struct EncoderNodes {
  NodeId output;
  std::vector<NodeId> params;  // same order as parameters(model)
};

/// Forward pass recorded on `graph`, with every weight and bias as a
/// trainable leaf.
EncoderNodes encode_images(Graph& graph, const EncoderModel& model, NodeId batch);

ParameterSet parameters(const EncoderModel& model);
void set_parameters(EncoderModel& model, const ParameterSet& params);

inline constexpr const char* kDefaultPromptTemplate = "a picture of a {class}";

/// Substitutes every "{class}" in the template.
std::string render_prompt(const std::string& prompt_template, const std::string& class_name);

/// Frozen class anchors standing in for a pretrained text encoder. Each row
/// is a unit vector keyed by the rendered prompt and the seed.
class TextEmbeddingTable {
 public:
  TextEmbeddingTable(std::vector<std::string> class_names, std::string prompt_template,
                     std::uint64_t requested_seed, std::uint64_t effective_seed, Matrix embeddings);

  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& prompt_template() const { return prompt_template_; }
  std::uint64_t requested_seed() const { return requested_seed_; }
  /// Seed actually used, after any collinearity re-draws.
  std::uint64_t effective_seed() const { return effective_seed_; }
  const Matrix& embeddings() const { return embeddings_; }
  int num_classes() const { return static_cast<int>(embeddings_.rows()); }
  int embed_dim() const { return static_cast<int>(embeddings_.cols()); }
  /// Anchor row for each label, e.g. the paired texts of a batch.
  Matrix rows_for(std::span<const int> labels) const;

 private:
  std::vector<std::string> class_names_;
  std::string prompt_template_;
  std::uint64_t requested_seed_;
  std::uint64_t effective_seed_;
  Matrix embeddings_;
};

inline constexpr double kMaxAnchorCosine = 0.5;
inline constexpr int kAnchorCheckMinDim = 32;
inline constexpr int kAnchorRetries = 16;

TextEmbeddingTable build_text_table(const std::vector<std::string>& class_names,
                                    const std::string& prompt_template, int embed_dim,
                                    std::uint64_t seed);

/// Largest |cos| over distinct row pairs of a unit-row matrix.
double max_pairwise_abs_cosine(const Matrix& unit_rows);

}  // namespace fedclip
