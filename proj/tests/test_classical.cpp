#include "fedclip/classical.hpp"
#include "fedclip/data.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/models.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace fedclip;
using fedclip::test::random_matrix;

namespace {

FeatureMatrix features_of(Matrix x, std::vector<int> y, int k) { return {std::move(x), std::move(y), k, "test"}; }

// Exhaustive k-NN with the documented ranking and tie rules.
std::vector<int> brute_knn(const FeatureMatrix& train, const Matrix& queries, int k) {
  std::vector<int> out;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::vector<std::pair<double, int>> all;
    for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
      double d2 = 0;
      for (Eigen::Index j = 0; j < queries.cols(); ++j) {
        const double diff = train.features(i, j) - queries(q, j);
        d2 += diff * diff;
      }
      all.emplace_back(std::sqrt(d2), train.labels[static_cast<std::size_t>(i)]);
    }
    std::sort(all.begin(), all.end());
    std::vector<int> votes(static_cast<std::size_t>(train.num_classes), 0);
    std::vector<double> dist(static_cast<std::size_t>(train.num_classes), 0.0);
    for (int i = 0; i < k; ++i) {
      ++votes[static_cast<std::size_t>(all[static_cast<std::size_t>(i)].second)];
      dist[static_cast<std::size_t>(all[static_cast<std::size_t>(i)].second)] += all[static_cast<std::size_t>(i)].first;
    }
    int best = 0;
    for (int c = 1; c < train.num_classes; ++c) {
      const auto uc = static_cast<std::size_t>(c), ub = static_cast<std::size_t>(best);
      if (votes[uc] > votes[ub] || (votes[uc] == votes[ub] && dist[uc] < dist[ub])) best = c;
    }
    out.push_back(best);
  }
  return out;
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  int hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("extract_features equals the encoder output") {
  const std::vector<int> widths{4, 8};
  EncoderModel m = init_encoder(widths, 3, 2);
  const Dataset d = generate_blobs(2, 10, 4, 2.0, 1);
  const FeatureMatrix f = extract_features(m, d, "enc");
  CHECK(f.features == encode_images(m, d.inputs));
  CHECK(f.labels == d.labels);
  CHECK(f.num_classes == 2);
  CHECK(f.source == "enc");
  CHECK(extract_features(m, d).features == f.features);

  const FeatureMatrix unit = extract_features(m, d, "enc", true);
  CHECK((unit.features.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);

  for (auto& l : m.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(extract_features(m, d).features.isZero(0.0));

  const Dataset wrong = generate_blobs(2, 10, 5, 2.0, 1);
  CHECK_THROWS_AS(extract_features(m, wrong), DimensionError);
}

TEST_CASE("knn on small examples") {
  Matrix x(5, 1);
  x << 0, 1, 2, 10, 11;
  const KnnModel one = knn_fit(features_of(x, {0, 0, 1, 1, 1}, 2), 1);
  CHECK(knn_predict(one, x) == std::vector<int>{0, 0, 1, 1, 1});

  const KnnModel three = knn_fit(features_of(x, {0, 0, 1, 1, 1}, 2), 3);
  Matrix q(1, 1);
  q << 0.4;
  CHECK(knn_predict(three, q) == std::vector<int>{0});  // votes {0, 0, 1}

  // Two votes each for k=4; class 1 neighbours are closer in total.
  Matrix y(4, 1);
  y << -3, 3.5, 1, -1;
  const KnnModel tie = knn_fit(features_of(y, {0, 0, 1, 1}, 2), 4);
  CHECK(knn_predict(tie, Matrix::Zero(1, 1)) == std::vector<int>{1});

  // Mirror image: equal votes and equal distance fall to the lower class.
  Matrix z(2, 1);
  z << -1, 1;
  const KnnModel even = knn_fit(features_of(z, {1, 0}, 2), 2);
  CHECK(knn_predict(even, Matrix::Zero(1, 1)) == std::vector<int>{0});

  CHECK_THROWS_AS(knn_fit(features_of(x, {0, 0, 1, 1, 1}, 2), 6), ConfigError);
  CHECK_THROWS_AS(knn_fit(features_of(x, {0, 0, 1, 1, 1}, 2), 0), ConfigError);
  CHECK_THROWS_AS(knn_predict(one, Matrix::Zero(1, 2)), DimensionError);
}

TEST_CASE("knn matches exhaustive search") {
  Rng rng(60);
  const Matrix train = random_matrix(200, 4, rng);
  std::vector<int> labels(200);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int& y : labels) y = pick(rng);
  const FeatureMatrix fm = features_of(train, labels, 4);
  const Matrix queries = random_matrix(50, 4, rng);
  for (int k : {1, 3, 5, 8}) CHECK(knn_predict(knn_fit(fm, k), queries) == brute_knn(fm, queries, k));
}

TEST_CASE("knn ignores storage order") {
  Rng rng(61);
  const Matrix train = random_matrix(60, 3, rng);
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < 60; ++i) labels[i] = static_cast<int>(i % 3);
  // Duplicate points with different labels force the (distance, label) rank.
  Matrix dup(62, 3);
  dup << train, train.row(0), train.row(1);
  labels.push_back(2);
  labels.push_back(0);
  std::vector<std::size_t> order(62);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix shuffled(62, 3);
  std::vector<int> shuffled_labels(62);
  for (std::size_t i = 0; i < 62; ++i) {
    shuffled.row(static_cast<Eigen::Index>(i)) = dup.row(static_cast<Eigen::Index>(order[i]));
    shuffled_labels[i] = labels[order[i]];
  }
  const Matrix queries = random_matrix(40, 3, rng);
  for (int k : {1, 2, 4, 7}) {
    CHECK(knn_predict(knn_fit(features_of(dup, labels, 3), k), queries) ==
          knn_predict(knn_fit(features_of(shuffled, shuffled_labels, 3), k), queries));
  }
}

TEST_CASE("svm separates linearly separable blobs") {
  const Dataset d = generate_blobs(2, 200, 4, 6.0, 13);
  const FeatureMatrix fm = features_of(d.inputs, d.labels, 2);
  const SvmModel m = svm_fit(fm, 1e-3, 10000, 1);
  CHECK(accuracy(svm_predict(m, d.inputs), d.labels) >= 0.99);

  const Dataset three = generate_blobs(3, 200, 4, 8.0, 14);
  const SvmModel m3 = svm_fit(features_of(three.inputs, three.labels, 3), 1e-3, 10000, 1, true);
  CHECK(accuracy(svm_predict(m3, three.inputs), three.labels) >= 0.99);
}

TEST_CASE("heavy regularization pins the weights near zero") {
  const Dataset d = generate_blobs(2, 50, 4, 3.0, 13);
  const SvmModel m = svm_fit(features_of(d.inputs, d.labels, 2), 1e6, 2000, 1);
  CHECK(m.weights.norm() < 1e-2);
}

TEST_CASE("svm is deterministic per seed") {
  const Dataset d = generate_blobs(3, 40, 4, 2.0, 13);
  const FeatureMatrix fm = features_of(d.inputs, d.labels, 3);
  const SvmModel a = svm_fit(fm, 1e-3, 3000, 7);
  const SvmModel b = svm_fit(fm, 1e-3, 3000, 7);
  const SvmModel c = svm_fit(fm, 1e-3, 3000, 8);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
  CHECK(a.weights != c.weights);
}

TEST_CASE("svm argument checks") {
  Matrix x = Matrix::Ones(4, 2);
  CHECK_THROWS_AS(svm_fit(features_of(x, {1, 1, 1, 1}, 2), 1e-3, 10, 0), ConfigError);
  CHECK_THROWS_AS(svm_fit(features_of(x, {0, 1, 0, 1}, 2), 0.0, 10, 0), ConfigError);
  CHECK_THROWS_AS(svm_fit(features_of(x, {0, 1, 0, 1}, 2), 1e-3, 0, 0), ConfigError);
}

TEST_CASE("svm prediction rules") {
  SvmModel m;
  m.weights = Matrix(2, 3);
  m.weights << 1, 2, -1, -1, -2, 1;
  m.biases = Vector::Zero(2);
  Matrix q(1, 3);
  q << 1, 2, -1;
  CHECK(svm_predict(m, q) == std::vector<int>{0});
  CHECK(svm_predict(m, -q) == std::vector<int>{1});

  SvmModel zero;
  zero.weights = Matrix::Zero(3, 3);
  zero.biases = Vector::Zero(3);
  Rng rng(3);
  const std::vector<int> all_zero(10, 0);
  CHECK(svm_predict(zero, random_matrix(10, 3, rng)) == all_zero);
}

TEST_CASE("svm decision values are an affine map") {
  Rng rng(5);
  SvmModel m;
  m.weights = random_matrix(3, 4, rng);
  m.biases = random_matrix(3, 1, rng);
  const Matrix q = random_matrix(7, 4, rng);
  const Matrix v = svm_decision_values(m, q);
  for (Eigen::Index i = 0; i < 7; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      double dot = m.biases(c);
      for (Eigen::Index j = 0; j < 4; ++j) dot += m.weights(c, j) * q(i, j);
      CHECK(std::abs(v(i, c) - dot) < 1e-12);
    }
  }
  const Matrix v2 = svm_decision_values(m, 2.0 * q);
  const Matrix linear = v.rowwise() - m.biases.transpose();
  const Matrix linear2 = v2.rowwise() - m.biases.transpose();
  CHECK((linear2 - 2.0 * linear).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hybrid pipeline yields one label per sample") {
  const std::vector<int> widths{4, 8};
  const EncoderModel enc = init_encoder(widths, 3, 9);
  const Dataset d = generate_blobs(3, 15, 4, 3.0, 2);
  const FeatureMatrix fm = extract_features(enc, d);
  CHECK(knn_predict(knn_fit(fm), fm.features).size() == d.size());
  CHECK(svm_predict(svm_fit(fm, 1e-3, 500, 0), fm.features).size() == d.size());
}
