#pragma once

#include "fsgen/dataset.hpp"
#include "fsgen/metrics.hpp"

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

namespace fsgen {

/// Bagged CART forest. Per-split feature subsampling uses ceil(sqrt(f)) for
/// classification and ceil(f/3) for regression. The two flags exist so a
/// single unbagged tree can be compared against SingleTree exactly.
struct TreeEnsembleOptions {
  int n_trees = 50;
  int max_depth = 12;
  Index min_leaf = 2;
  bool bootstrap = true;
  bool feature_subsample = true;
};

struct SingleTreeOptions {
  int max_depth = 12;
  Index min_leaf = 2;
};

struct KNearestOptions {
  int k = 5;
};

using ModelKind = std::variant<TreeEnsembleOptions, SingleTreeOptions, KNearestOptions>;

std::string to_string(const ModelKind& model);

/// CART with exact split search. Ties in split gain are broken by
/// (feature index, threshold) order so training is deterministic.
class DecisionTree {
 public:
  /// mtry == 0 means consider every feature at every split.
  void fit(const Matrix<double>& x, const Vector<double>& y, TaskKind task,
           int max_depth, Index min_leaf, int mtry, std::mt19937_64& rng);
  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean (regression) or class id (classification)
  };
  int build(const Matrix<double>& x, const Vector<double>& y,
            std::vector<Index>& rows, int depth, std::mt19937_64& rng);

  std::vector<Node> nodes_;
  TaskKind task_ = TaskKind::Regression;
  int max_depth_ = 0;
  Index min_leaf_ = 1;
  int mtry_ = 0;
  int n_classes_ = 0;
};

/// Trains `model` on the train rows restricted to the selected columns,
/// predicts the test rows and returns the task metric (weighted F1 or 1-RAE).
/// Depends on `selected` only as a set; deterministic given `seed`.
UtilityScore fit_predict_score(const Dataset& train, const Dataset& test,
                               const std::vector<int>& selected,
                               const ModelKind& model, std::uint64_t seed);

/// Top-k features by absolute Pearson correlation with the target (class ids
/// treated as numeric). Constant columns score 0; ties prefer the lower
/// feature index. Returned sorted ascending.
std::vector<int> kbest_baseline(const Dataset& ds, int k);

}  // namespace fsgen
