#include "fsgen/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fsgen {

std::string to_string(Metric metric) {
  return metric == Metric::F1Weighted ? "f1_weighted" : "one_minus_rae";
}

double f1_weighted(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DataError("f1_weighted: length mismatch");
  if (y_true.empty()) throw DataError("f1_weighted: empty input");

  int max_label = 0;
  for (int v : y_true) max_label = std::max(max_label, v);
  for (int v : y_pred) max_label = std::max(max_label, v);
  std::size_t nc = static_cast<std::size_t>(max_label) + 1;

  std::vector<double> tp(nc, 0), fp(nc, 0), fn(nc, 0), support(nc, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    auto t = static_cast<std::size_t>(y_true[i]);
    auto p = static_cast<std::size_t>(y_pred[i]);
    support[t] += 1;
    if (t == p) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  double weighted = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (support[c] == 0) continue;
    double denom = 2 * tp[c] + fp[c] + fn[c];
    double f1 = denom > 0 ? 2 * tp[c] / denom : 0.0;
    weighted += support[c] * f1;
  }
  return weighted / static_cast<double>(y_true.size());
}

double one_minus_rae(const Vector<double>& y_true, const Vector<double>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DataError("one_minus_rae: length mismatch");
  if (y_true.size() < 2) throw DataError("one_minus_rae: need at least 2 values");
  double mean = y_true.mean();
  double denom = (y_true.array() - mean).abs().sum();
  if (denom == 0.0)
    throw DataError("one_minus_rae: constant y_true has zero relative error scale");
  double num = (y_true - y_pred).array().abs().sum();
  return 1.0 - num / denom;
}

}  // namespace fsgen
