#include "fedclip/metrics.hpp"

#include "fedclip/errors.hpp"

#include <string>

namespace fedclip {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.counts.rows() != counts.rows()) {
    throw DimensionError("cannot add confusion matrices over " + std::to_string(counts.rows()) +
                         " and " + std::to_string(other.counts.rows()) + " classes");
  }
  counts += other.counts;
  return *this;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  if (num_classes < 1) throw ContractError("confusion: num_classes must be positive");
  if (y_true.size() != y_pred.size()) {
    throw DimensionError("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  cm.counts = CountMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("confusion: label out of range at index " + std::to_string(i));
    }
    ++cm.counts(t, p);
  }
  return cm;
}

MetricsReport report(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total < 1) throw ContractError("report: confusion matrix is empty");
  const int k = cm.num_classes();
  const double n = static_cast<double>(total);

  MetricsReport r;
  r.support.resize(static_cast<std::size_t>(k));
  std::int64_t trace = 0;
  double recall_sum = 0.0;
  int supported = 0;
  double prec_w = 0.0;
  double f1_w = 0.0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = cm.counts(c, c);
    const std::int64_t support = cm.counts.row(c).sum();
    const std::int64_t predicted = cm.counts.col(c).sum();
    r.support[static_cast<std::size_t>(c)] = support;
    trace += tp;
    if (support == 0) continue;
    const double recall = static_cast<double>(tp) / static_cast<double>(support);
    const double precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    const double f1 = tp == 0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    recall_sum += recall;
    ++supported;
    prec_w += static_cast<double>(support) * precision;
    f1_w += static_cast<double>(support) * f1;
  }
  r.acc = static_cast<double>(trace) / n;
  // support_c * (tp_c / support_c) == tp_c, so weighted recall is trace/total.
  r.recall_weighted = r.acc;
  r.bacc = recall_sum / static_cast<double>(supported);
  r.precision_weighted = prec_w / n;
  r.f1_weighted = f1_w / n;
  r.avg = (r.acc + r.bacc + r.precision_weighted + r.recall_weighted + r.f1_weighted) / 5.0;
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"acc", r.acc},
          {"bacc", r.bacc},
          {"precision_weighted", r.precision_weighted},
          {"recall_weighted", r.recall_weighted},
          {"f1_weighted", r.f1_weighted},
          {"avg", r.avg},
          {"support", r.support}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.acc = j.at("acc").get<double>();
  r.bacc = j.at("bacc").get<double>();
  r.precision_weighted = j.at("precision_weighted").get<double>();
  r.recall_weighted = j.at("recall_weighted").get<double>();
  r.f1_weighted = j.at("f1_weighted").get<double>();
  r.avg = j.at("avg").get<double>();
  r.support = j.at("support").get<std::vector<std::int64_t>>();
  return r;
}

}  // namespace fedclip
