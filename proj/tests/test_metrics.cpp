#include "fedclip/errors.hpp"
#include "fedclip/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace fedclip;

namespace {

// Per-class double loop over the raw label vectors.
MetricsReport naive_report(const std::vector<int>& t, const std::vector<int>& p, int k) {
  const double n = static_cast<double>(t.size());
  MetricsReport r;
  double correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  r.acc = correct / n;
  double recall_sum = 0;
  int supported = 0;
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == c && p[i] == c) tp += 1;
      if (t[i] != c && p[i] == c) fp += 1;
      if (t[i] == c && p[i] != c) fn += 1;
    }
    const double support = tp + fn;
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = support > 0 ? tp / support : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    if (support > 0) {
      recall_sum += rec;
      ++supported;
    }
    r.precision_weighted += support / n * prec;
    r.recall_weighted += support / n * rec;
    r.f1_weighted += support / n * f1;
  }
  r.bacc = recall_sum / supported;
  r.avg = (r.acc + r.bacc + r.precision_weighted + r.recall_weighted + r.f1_weighted) / 5.0;
  return r;
}

void check_close(const MetricsReport& a, const MetricsReport& b, double tol) {
  CHECK(std::abs(a.acc - b.acc) < tol);
  CHECK(std::abs(a.bacc - b.bacc) < tol);
  CHECK(std::abs(a.precision_weighted - b.precision_weighted) < tol);
  CHECK(std::abs(a.recall_weighted - b.recall_weighted) < tol);
  CHECK(std::abs(a.f1_weighted - b.f1_weighted) < tol);
  CHECK(std::abs(a.avg - b.avg) < tol);
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<int> t{0, 0, 0, 1, 1, 1};
  const std::vector<int> p{0, 0, 1, 1, 1, 1};
  const ConfusionMatrix cm = confusion(t, p, 2);
  CHECK(cm.counts(0, 0) == 2);
  CHECK(cm.counts(0, 1) == 1);
  CHECK(cm.counts(1, 0) == 0);
  CHECK(cm.counts(1, 1) == 3);
  CHECK(cm.total() == 6);

  const ConfusionMatrix perfect = confusion(t, t, 2);
  CHECK(perfect.counts(0, 1) == 0);
  CHECK(perfect.counts(1, 0) == 0);

  const ConfusionMatrix empty = confusion({}, {}, 3);
  CHECK(empty.counts.isZero());
  CHECK(empty.num_classes() == 3);

  try {
    confusion(std::vector<int>{0, 2}, std::vector<int>{0, 0}, 2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{0, 1}, 2), DimensionError);
}

TEST_CASE("report on a worked example") {
  ConfusionMatrix cm{CountMatrix(2, 2)};
  cm.counts << 2, 1, 0, 3;
  const MetricsReport r = report(cm);
  CHECK(r.acc == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(r.bacc == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-12));
  CHECK(r.precision_weighted == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(r.recall_weighted == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(r.f1_weighted == doctest::Approx((3 * 0.8 + 3 * (6.0 / 7.0)) / 6).epsilon(1e-12));
  CHECK(std::abs(r.f1_weighted - 0.828571) < 1e-6);
  CHECK(r.support == std::vector<std::int64_t>{3, 3});
}

TEST_CASE("diagonal confusion scores one everywhere") {
  ConfusionMatrix cm{CountMatrix::Zero(3, 3)};
  cm.counts.diagonal() << 4, 1, 7;
  const MetricsReport r = report(cm);
  CHECK(r.acc == 1.0);
  CHECK(r.bacc == 1.0);
  CHECK(r.precision_weighted == 1.0);
  CHECK(r.f1_weighted == 1.0);
  CHECK(r.avg == 1.0);
}

TEST_CASE("empty confusion has no report") {
  CHECK_THROWS_AS(report(ConfusionMatrix{CountMatrix::Zero(2, 2)}), ContractError);
}

TEST_CASE("report matches a naive oracle on random predictions") {
  std::mt19937_64 rng(2718);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 5;
    const int n = 5 + static_cast<int>(rng() % 40);
    std::uniform_int_distribution<int> label(0, k - 1);
    std::vector<int> t(static_cast<std::size_t>(n)), p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = label(rng);
      p[static_cast<std::size_t>(i)] = rng() % 3 == 0 ? label(rng) : t[static_cast<std::size_t>(i)];
    }
    const MetricsReport r = report(confusion(t, p, k));
    check_close(r, naive_report(t, p, k), 1e-12);
    CHECK(r.recall_weighted == r.acc);
    const double lo = std::min({r.acc, r.bacc, r.precision_weighted, r.recall_weighted, r.f1_weighted});
    const double hi = std::max({r.acc, r.bacc, r.precision_weighted, r.recall_weighted, r.f1_weighted});
    CHECK(r.avg >= lo - 1e-15);
    CHECK(r.avg <= hi + 1e-15);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
  }
}

TEST_CASE("unsupported classes are skipped by BACC and never-predicted classes score zero precision") {
  // Class 2 has no true samples; class 1 is never predicted.
  const std::vector<int> t{0, 0, 1, 1};
  const std::vector<int> p{0, 2, 0, 0};
  const MetricsReport r = report(confusion(t, p, 3));
  CHECK(r.bacc == doctest::Approx(0.25));
  check_close(r, naive_report(t, p, 3), 1e-12);
}

TEST_CASE("relabelling classes consistently leaves metrics unchanged") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> label(0, 3);
  std::vector<int> t(50), p(50);
  for (std::size_t i = 0; i < 50; ++i) {
    t[i] = label(rng);
    p[i] = label(rng);
  }
  std::vector<int> perm{2, 0, 3, 1};
  std::vector<int> tp(50), pp(50);
  for (std::size_t i = 0; i < 50; ++i) {
    tp[i] = perm[static_cast<std::size_t>(t[i])];
    pp[i] = perm[static_cast<std::size_t>(p[i])];
  }
  check_close(report(confusion(t, p, 4)), report(confusion(tp, pp, 4)), 1e-12);
}

TEST_CASE("json round trip") {
  ConfusionMatrix cm{CountMatrix(2, 2)};
  cm.counts << 2, 1, 0, 3;
  const MetricsReport r = report(cm);
  const nlohmann::json j = to_json(r);
  for (const char* key : {"acc", "bacc", "precision_weighted", "recall_weighted", "f1_weighted", "avg", "support"}) {
    CHECK(j.contains(key));
  }
  const MetricsReport back = metrics_from_json(j);
  CHECK(back.acc == r.acc);
  CHECK(back.f1_weighted == r.f1_weighted);
  CHECK(back.support == r.support);
}

TEST_CASE("confusion matrices add") {
  ConfusionMatrix a = confusion(std::vector<int>{0, 1}, std::vector<int>{0, 0}, 2);
  a += confusion(std::vector<int>{1}, std::vector<int>{1}, 2);
  CHECK(a.total() == 3);
  CHECK(a.counts(1, 1) == 1);
}
