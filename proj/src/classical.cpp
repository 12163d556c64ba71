#include "fedclip/classical.hpp"

#include "fedclip/contrastive.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace fedclip {

FeatureMatrix extract_features(const EncoderModel& model, const Dataset& data, std::string source,
                               bool normalize) {
  if (data.size() == 0) throw ContractError("extract_features: dataset is empty");
  FeatureMatrix fm;
  fm.features = encode_images(model, data.inputs);
  if (normalize) fm.features = fm.features.rowwise().normalized();
  fm.labels = data.labels;
  fm.num_classes = data.num_classes();
  fm.source = std::move(source);
  return fm;
}

KnnModel knn_fit(FeatureMatrix features, int k) {
  if (k < 1) throw ConfigError("knn: k must be >= 1");
  if (static_cast<std::size_t>(k) > features.labels.size()) {
    throw ConfigError("knn: k = " + std::to_string(k) + " exceeds the " +
                      std::to_string(features.labels.size()) + " stored points");
  }
  return KnnModel{k, std::move(features)};
}

std::vector<int> knn_predict(const KnnModel& model, const Matrix& queries) {
  const Matrix& stored = model.stored.features;
  const auto n = static_cast<std::size_t>(stored.rows());
  if (model.k < 1 || static_cast<std::size_t>(model.k) > n) {
    throw ConfigError("knn: k = " + std::to_string(model.k) + " is invalid for " + std::to_string(n) +
                      " stored points");
  }
  if (queries.cols() != stored.cols()) {
    throw DimensionError("knn_predict: queries " + shape_string(queries) + " vs stored " +
                         shape_string(stored));
  }
  const int num_classes = std::max(model.stored.num_classes,
                                   1 + *std::max_element(model.stored.labels.begin(), model.stored.labels.end()));
  const auto k = static_cast<std::size_t>(model.k);

  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  std::vector<std::pair<double, int>> neighbours(n);
  std::vector<int> votes(static_cast<std::size_t>(num_classes));
  std::vector<double> spread(static_cast<std::size_t>(num_classes));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Vector dist = (stored.rowwise() - queries.row(q)).rowwise().norm();
    for (std::size_t i = 0; i < n; ++i) {
      neighbours[i] = {dist(static_cast<Eigen::Index>(i)), model.stored.labels[i]};
    }
    std::partial_sort(neighbours.begin(), neighbours.begin() + static_cast<std::ptrdiff_t>(k),
                      neighbours.end());
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(spread.begin(), spread.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = static_cast<std::size_t>(neighbours[i].second);
      ++votes[c];
      spread[c] += neighbours[i].first;
    }
    int best = -1;
    for (int c = 0; c < num_classes; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (votes[ci] == 0) continue;
      if (best < 0) {
        best = c;
        continue;
      }
      const auto bi = static_cast<std::size_t>(best);
      if (votes[ci] > votes[bi] || (votes[ci] == votes[bi] && spread[ci] < spread[bi])) best = c;
    }
    out.push_back(best);
  }
  return out;
}

SvmModel svm_fit(const FeatureMatrix& features, double lambda, int iterations, std::uint64_t seed,
                 bool average) {
  if (!(lambda > 0.0)) throw ConfigError("svm: lambda must be > 0");
  if (iterations < 1) throw ConfigError("svm: iterations must be >= 1");
  const Matrix& x = features.features;
  const auto n = static_cast<Eigen::Index>(features.labels.size());
  if (x.rows() != n || n == 0) throw DimensionError("svm_fit: feature/label count mismatch");
  const std::set<int> present(features.labels.begin(), features.labels.end());
  if (present.size() < 2) throw ConfigError("svm_fit: training data contains a single class");
  const int num_classes = std::max(features.num_classes, *present.rbegin() + 1);

  const Eigen::Index d = x.cols();
  const double radius = 1.0 / std::sqrt(lambda);
  SvmModel model;
  model.lambda = lambda;
  model.iterations = iterations;
  model.weights = Matrix::Zero(num_classes, d);
  model.biases = Vector::Zero(num_classes);

  for (int c = 0; c < num_classes; ++c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), 0x5F3));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    // Augmented weight: the last coordinate multiplies a constant 1.
    Vector w = Vector::Zero(d + 1);
    Vector w_sum = Vector::Zero(d + 1);
    int averaged = 0;
    const int average_from = iterations / 2 + 1;
    for (int t = 1; t <= iterations; ++t) {
      const Eigen::Index i = pick(rng);
      const double y = features.labels[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = y * (x.row(i).dot(w.head(d)) + w(d));
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        w.head(d) += eta * y * x.row(i).transpose();
        w(d) += eta * y;
      }
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      if (average && t >= average_from) {
        w_sum += w;
        ++averaged;
      }
    }
    if (average && averaged > 0) w = w_sum / static_cast<double>(averaged);
    model.weights.row(c) = w.head(d).transpose();
    model.biases(c) = w(d);
  }
  return model;
}

Matrix svm_decision_values(const SvmModel& model, const Matrix& queries) {
  if (queries.cols() != model.weights.cols()) {
    throw DimensionError("svm_predict: queries " + shape_string(queries) + " vs weights " +
                         shape_string(model.weights));
  }
  Matrix values = queries * model.weights.transpose();
  values.rowwise() += model.biases.transpose();
  return values;
}

std::vector<int> svm_predict(const SvmModel& model, const Matrix& queries) {
  return argmax_rows(svm_decision_values(model, queries));
}

}  // namespace fedclip
