#include "fedclip/checkpoint.hpp"

#include "fedclip/errors.hpp"

#include <fstream>

namespace fedclip {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint matrix: " + std::to_string(data.size()) + " values for " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[k++].get<double>();
  }
  return m;
}

namespace {

json envelope(const char* kind) {
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"kind", kind}};
}

void expect_kind(const json& doc, const std::string& kind) {
  const std::string found = checkpoint_kind(doc);
  if (found != kind) throw DataError("expected a '" + kind + "' checkpoint, found '" + found + "'");
}

}  // namespace

std::string checkpoint_kind(const json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
    throw DataError("not a fedclip checkpoint");
  }
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + doc.value("version", json(nullptr)).dump());
  }
  return doc.at("kind").get<std::string>();
}

json to_checkpoint(const EncoderModel& model) {
  json doc = envelope("encoder");
  doc["widths"] = model.widths();
  doc["embed_dim"] = model.embed_dim;
  doc["seed"] = model.seed;
  json layers = json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"activation", l.activation == Activation::Relu ? "relu" : "identity"},
                      {"weight", matrix_to_json(l.weight)},
                      {"bias", matrix_to_json(l.bias)}});
  }
  doc["layers"] = std::move(layers);
  return doc;
}

EncoderModel encoder_from_checkpoint(const json& doc) {
  expect_kind(doc, "encoder");
  EncoderModel model;
  model.embed_dim = doc.at("embed_dim").get<int>();
  model.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& l : doc.at("layers")) {
    DenseLayer layer;
    const std::string act = l.at("activation").get<std::string>();
    if (act != "relu" && act != "identity") throw DataError("unknown activation '" + act + "'");
    layer.activation = act == "relu" ? Activation::Relu : Activation::Identity;
    layer.weight = matrix_from_json(l.at("weight"));
    layer.bias = matrix_from_json(l.at("bias"));
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw DataError("checkpoint layer bias does not match its weight");
    }
    if (!model.layers.empty() && model.layers.back().weight.cols() != layer.weight.rows()) {
      throw DataError("checkpoint layers do not chain");
    }
    model.layers.push_back(std::move(layer));
  }
  if (model.layers.empty() || model.layers.back().weight.cols() != model.embed_dim) {
    throw DataError("checkpoint output width does not match embed_dim");
  }
  if (doc.at("widths").get<std::vector<int>>() != model.widths()) {
    throw DataError("checkpoint widths disagree with its layers");
  }
  return model;
}

json to_checkpoint(const KnnModel& model) {
  json doc = envelope("knn");
  doc["k"] = model.k;
  doc["distance"] = "euclidean";
  doc["num_classes"] = model.stored.num_classes;
  doc["source"] = model.stored.source;
  doc["labels"] = model.stored.labels;
  doc["features"] = matrix_to_json(model.stored.features);
  return doc;
}

KnnModel knn_from_checkpoint(const json& doc) {
  expect_kind(doc, "knn");
  FeatureMatrix fm;
  fm.features = matrix_from_json(doc.at("features"));
  fm.labels = doc.at("labels").get<std::vector<int>>();
  fm.num_classes = doc.at("num_classes").get<int>();
  fm.source = doc.value("source", "");
  if (static_cast<Eigen::Index>(fm.labels.size()) != fm.features.rows()) {
    throw DataError("knn checkpoint: label count does not match features");
  }
  return knn_fit(std::move(fm), doc.at("k").get<int>());
}

json to_checkpoint(const SvmModel& model) {
  json doc = envelope("svm");
  doc["lambda"] = model.lambda;
  doc["iterations"] = model.iterations;
  doc["weights"] = matrix_to_json(model.weights);
  doc["biases"] = matrix_to_json(model.biases);
  return doc;
}

SvmModel svm_from_checkpoint(const json& doc) {
  expect_kind(doc, "svm");
  SvmModel model;
  model.lambda = doc.at("lambda").get<double>();
  model.iterations = doc.at("iterations").get<int>();
  model.weights = matrix_from_json(doc.at("weights"));
  const Matrix b = matrix_from_json(doc.at("biases"));
  if (b.cols() != 1 || b.rows() != model.weights.rows()) throw DataError("svm checkpoint: bias shape mismatch");
  model.biases = b.col(0);
  return model;
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace fedclip
