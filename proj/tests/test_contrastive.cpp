#include "fedclip/contrastive.hpp"
#include "fedclip/errors.hpp"
#include "fedclip/gradcheck.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fedclip;
using fedclip::test::random_matrix;

namespace {

// Written out longhand; independent of softmax_rows.
Matrix naive_softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double denom = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) denom += std::exp(z(i, j));
    for (Eigen::Index j = 0; j < z.cols(); ++j) p(i, j) = std::exp(z(i, j)) / denom;
  }
  return p;
}

TextEmbeddingTable table_from(const Matrix& rows) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) names.push_back("c" + std::to_string(i));
  return TextEmbeddingTable(names, kDefaultPromptTemplate, 0, 0, rows.rowwise().normalized());
}

}  // namespace

TEST_CASE("similarity is cosine") {
  Matrix a(3, 2), b(2, 2);
  a << 1, 0, 0, 1, 3, 0;
  b << 1, 0, 0, 2;
  const Matrix s = similarity(a, b);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 1) == doctest::Approx(0.0));
  CHECK(s(1, 1) == doctest::Approx(1.0));
  CHECK(s(2, 0) == doctest::Approx(1.0));  // scale invariance

  Matrix zero = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(similarity(zero, b), DegenerateInputError);
  CHECK_THROWS_AS(similarity(Matrix::Ones(1, 3), b), DimensionError);

  Rng rng(2);
  const Matrix x = random_matrix(20, 6, rng);
  const Matrix y = random_matrix(9, 6, rng);
  const Matrix r = similarity(x, y);
  CHECK(r.maxCoeff() <= 1.0 + 1e-9);
  CHECK(r.minCoeff() >= -1.0 - 1e-9);
}

TEST_CASE("classify with hand-set similarities") {
  // Anchors e0, e1; image directions chosen so that s = [ln 2, 0].
  const double s0 = std::log(2.0);
  Matrix anchors(2, 2);
  anchors << 1, 0, 0, 1;
  Matrix img(1, 2);
  img << s0, std::sqrt(1 - s0 * s0);
  // cos to e0 is ln2 and to e1 is sqrt(1 - ln²2); put the second anchor
  // orthogonal to the image instead to get exactly 0.
  anchors.row(1) << -img(0, 1), img(0, 0);
  const Classification c = classify(img, table_from(anchors), ContrastiveConfig{1.0});
  CHECK(c.probabilities(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(c.probabilities(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(c.labels[0] == 0);
}

TEST_CASE("classify with equal similarities is uniform and picks the lowest index") {
  Matrix anchors(3, 3);
  anchors << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Matrix img = Matrix::Ones(2, 3);
  const Classification c = classify(img, table_from(anchors), ContrastiveConfig{0.07});
  CHECK((c.probabilities.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
  CHECK(c.labels == std::vector<int>{0, 0});
}

TEST_CASE("classify matches an independent softmax") {
  Rng rng(31);
  const Matrix img = random_matrix(10, 5, rng);
  const TextEmbeddingTable t = table_from(random_matrix(3, 5, rng));
  const ContrastiveConfig cfg{0.3};
  const Classification c = classify(img, t, cfg);
  Matrix s(10, 3);
  for (int i = 0; i < 10; ++i) {
    for (int k = 0; k < 3; ++k) {
      s(i, k) = img.row(i).dot(t.embeddings().row(k)) / (img.row(i).norm() * t.embeddings().row(k).norm());
    }
  }
  CHECK((c.probabilities - naive_softmax(s / cfg.temperature)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("classify stays finite at small temperature") {
  Matrix anchors(2, 2);
  anchors << 1, 0, -1, 0;
  Matrix img(2, 2);
  img << 1, 1e-9, -1, 1e-9;
  const Classification c = classify(img, table_from(anchors), ContrastiveConfig{0.01});
  CHECK(c.probabilities.allFinite());
  CHECK(c.labels == std::vector<int>{0, 1});
}

TEST_CASE("temperature must be positive") {
  CHECK_THROWS_AS(validate(ContrastiveConfig{0.0}), ConfigError);
  CHECK_THROWS_AS(validate(ContrastiveConfig{-1.0}), ConfigError);
}

TEST_CASE("contrastive loss closed forms") {
  SUBCASE("B = 1 is exactly zero") {
    Graph g;
    Matrix img(1, 3), txt(1, 3);
    img << 0.3, -1, 2;
    txt << 1, 1, 1;
    const NodeId loss = contrastive_loss(g, g.leaf(img, true), txt, ContrastiveConfig{0.07});
    CHECK(g.value(loss)(0, 0) == 0.0);
  }
  SUBCASE("B = 2 with S = I") {
    Graph g;
    const Matrix eye = Matrix::Identity(2, 2);
    const NodeId loss = contrastive_loss(g, g.leaf(eye, true), eye, ContrastiveConfig{1.0});
    const double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(std::abs(g.value(loss)(0, 0) - expect) < 1e-12);
    CHECK(std::abs(expect - 0.313262) < 1e-6);
    CHECK(std::abs(contrastive_terms(eye, eye, ContrastiveConfig{1.0}).loss - expect) < 1e-12);
  }
  SUBCASE("empty batch") {
    Graph g;
    CHECK_THROWS_AS(contrastive_loss(g, g.leaf(Matrix(0, 3), true), Matrix(0, 3), ContrastiveConfig{}),
                    ContractError);
  }
}

TEST_CASE("contrastive loss properties on random batches") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const int b = 1 + trial % 9;
    const Matrix img = random_matrix(b, 6, rng);
    const Matrix txt = random_matrix(b, 6, rng);
    const double tau = 0.02 + 0.1 * trial;
    const ContrastiveTerms t = contrastive_terms(img, txt, ContrastiveConfig{tau});
    CHECK(t.loss >= 0.0);
    CHECK((t.image_probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK((t.text_probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);

    Graph g;
    const NodeId loss = contrastive_loss(g, g.leaf(img, true), txt, ContrastiveConfig{tau});
    CHECK(std::abs(g.value(loss)(0, 0) - t.loss) < 1e-12);
  }
}

TEST_CASE("contrastive loss gradient matches finite differences and skips text") {
  Rng rng(9);
  const Matrix img = random_matrix(4, 6, rng);
  const Matrix txt = random_matrix(4, 6, rng);
  const ContrastiveConfig cfg{0.3};
  Graph g;
  const NodeId in = g.leaf(img, true);
  g.backward(contrastive_loss(g, in, txt, cfg));
  const auto numeric = finite_difference_grad(
      [&](std::span<const Matrix> p) { return contrastive_terms(p[0], txt, cfg).loss; }, {img});
  CHECK(relative_error(g.grad(in), numeric[0]) < 1e-4);

  for (std::size_t i = 0; i < g.size(); ++i) {
    const NodeId id{i};
    if (g.kind(id) == OpKind::Leaf && !(id == in)) CHECK_FALSE(g.tensor(id).grad.has_value());
  }
}

TEST_CASE("anchor cross entropy matches the per-sample -log p") {
  Rng rng(41);
  const Matrix img = random_matrix(6, 4, rng);
  const TextEmbeddingTable t = table_from(random_matrix(3, 4, rng));
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  const ContrastiveConfig cfg{0.5};
  Graph g;
  const NodeId loss = anchor_cross_entropy(g, g.leaf(img, true), t, labels, cfg);
  const Matrix p = classify(img, t, cfg).probabilities;
  double expect = 0;
  for (int i = 0; i < 6; ++i) expect -= std::log(p(i, labels[static_cast<std::size_t>(i)]));
  CHECK(std::abs(g.value(loss)(0, 0) - expect / 6.0) < 1e-12);
}

TEST_CASE("argmax over labels is temperature invariant") {
  Rng rng(5);
  const Matrix img = random_matrix(200, 8, rng);
  const TextEmbeddingTable t = table_from(random_matrix(4, 8, rng));
  const auto base = classify(img, t, ContrastiveConfig{0.07}).labels;
  for (double tau : {0.01, 1.0, 5.0}) CHECK(classify(img, t, ContrastiveConfig{tau}).labels == base);
}
