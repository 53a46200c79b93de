#pragma once

#include "fsgen/types.hpp"

#include <string>
#include <vector>

namespace fsgen {

enum class Metric { F1Weighted, OneMinusRAE };

std::string to_string(Metric metric);

/// Downstream quality of a feature subset. `value` is the raw metric;
/// 1-RAE can be negative for poor predictors, so corpus labels go through
/// clamped01() and `clamped` records that the raw value fell outside [0,1].
struct UtilityScore {
  double value = 0.0;
  Metric metric = Metric::OneMinusRAE;
  bool clamped = false;

  double clamped01() const {
    if (value < 0.0) return 0.0;
    if (value > 1.0) return 1.0;
    return value;
  }
};

/// Per-class F1 averaged with class-support weights; classes absent from
/// y_true carry zero weight.
double f1_weighted(const std::vector<int>& y_true, const std::vector<int>& y_pred);

/// 1 - sum|y - yhat| / sum|y - mean(y)|. Unbounded below; throws on a
/// constant y_true (zero denominator).
double one_minus_rae(const Vector<double>& y_true, const Vector<double>& y_pred);

}  // namespace fsgen
