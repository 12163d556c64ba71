#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace fedclip {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  CountMatrix counts;

  int num_classes() const { return static_cast<int>(counts.rows()); }
  std::int64_t total() const { return counts.sum(); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);

struct MetricsReport {
  double acc = 0.0;
  double bacc = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double avg = 0.0;
  std::vector<std::int64_t> support;
};

/// ACC, balanced accuracy (macro recall over classes with support), the
/// support-weighted precision/recall/F1, and AVG = mean of those five.
/// A never-predicted class has precision 0.
MetricsReport report(const ConfusionMatrix& cm);

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace fedclip
