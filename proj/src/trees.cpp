#include "fsgen/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace fsgen {

std::string to_string(const ModelKind& model) {
  if (auto* te = std::get_if<TreeEnsembleOptions>(&model))
    return "tree_ensemble(n_trees=" + std::to_string(te->n_trees) +
           ",max_depth=" + std::to_string(te->max_depth) +
           ",min_leaf=" + std::to_string(te->min_leaf) + ")";
  if (auto* st = std::get_if<SingleTreeOptions>(&model))
    return "single_tree(max_depth=" + std::to_string(st->max_depth) +
           ",min_leaf=" + std::to_string(st->min_leaf) + ")";
  auto& kn = std::get<KNearestOptions>(model);
  return "k_nearest(k=" + std::to_string(kn.k) + ")";
}

namespace {

// Midpoint of adjacent sorted values a < b. Falls back to a when rounding
// pushes the midpoint onto b, so the `<= threshold` partition always matches
// the split-scan counts.
double split_threshold(double a, double b) {
  double mid = 0.5 * (a + b);
  return mid < b ? mid : a;
}

double majority_label(const std::vector<Index>& counts) {
  Index best_count = -1;
  std::size_t best = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > best_count) {  // first maximum wins -> smallest label on ties
      best_count = counts[c];
      best = c;
    }
  return static_cast<double>(best);
}

}  // namespace

void DecisionTree::fit(const Matrix<double>& x, const Vector<double>& y,
                       TaskKind task, int max_depth, Index min_leaf, int mtry,
                       std::mt19937_64& rng) {
  task_ = task;
  max_depth_ = max_depth;
  min_leaf_ = std::max<Index>(1, min_leaf);
  mtry_ = mtry;
  n_classes_ = 0;
  if (task == TaskKind::Classification)
    n_classes_ = static_cast<int>(y.maxCoeff()) + 1;
  nodes_.clear();
  std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  build(x, y, rows, 0, rng);
}

int DecisionTree::build(const Matrix<double>& x, const Vector<double>& y,
                        std::vector<Index>& rows, int depth,
                        std::mt19937_64& rng) {
  int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  auto make_leaf = [&](int node_id) {
    if (task_ == TaskKind::Regression) {
      double sum = 0;
      for (Index r : rows) sum += y[r];
      nodes_[static_cast<std::size_t>(node_id)].value =
          sum / static_cast<double>(rows.size());
    } else {
      std::vector<Index> counts(static_cast<std::size_t>(n_classes_), 0);
      for (Index r : rows) ++counts[static_cast<std::size_t>(y[r])];
      nodes_[static_cast<std::size_t>(node_id)].value = majority_label(counts);
    }
    return node_id;
  };

  bool pure = true;
  for (std::size_t i = 1; i < rows.size() && pure; ++i)
    pure = (y[rows[i]] == y[rows[0]]);
  if (depth >= max_depth_ || static_cast<Index>(rows.size()) < 2 * min_leaf_ || pure)
    return make_leaf(id);

  // Candidate features, ascending so gain ties resolve to the lowest index.
  int nf = static_cast<int>(x.cols());
  std::vector<int> candidates;
  if (mtry_ > 0 && mtry_ < nf) {
    std::vector<int> all(static_cast<std::size_t>(nf));
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<int> pick(i, nf - 1);
      std::swap(all[static_cast<std::size_t>(i)],
                all[static_cast<std::size_t>(pick(rng))]);
    }
    candidates.assign(all.begin(), all.begin() + mtry_);
    std::sort(candidates.begin(), candidates.end());
  } else {
    candidates.resize(static_cast<std::size_t>(nf));
    std::iota(candidates.begin(), candidates.end(), 0);
  }

  const Index n = static_cast<Index>(rows.size());
  int best_feature = -1;
  double best_threshold = 0;
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::pair<double, double>> vals;  // (feature value, target)
  vals.reserve(rows.size());
  std::vector<Index> left_counts, right_counts;

  for (int f : candidates) {
    vals.clear();
    for (Index r : rows) vals.emplace_back(x(r, f), y[r]);
    std::sort(vals.begin(), vals.end());
    if (vals.front().first == vals.back().first) continue;

    if (task_ == TaskKind::Regression) {
      // Minimize SSE_left + SSE_right via running sums.
      double total_sum = 0, total_sq = 0;
      for (auto& [v, t] : vals) {
        total_sum += t;
        total_sq += t * t;
      }
      double left_sum = 0, left_sq = 0;
      for (Index i = 0; i + 1 < n; ++i) {
        auto idx = static_cast<std::size_t>(i);
        left_sum += vals[idx].second;
        left_sq += vals[idx].second * vals[idx].second;
        if (vals[idx].first == vals[idx + 1].first) continue;
        Index nl = i + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        double right_sum = total_sum - left_sum;
        double right_sq = total_sq - left_sq;
        double score = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                       (right_sq - right_sum * right_sum / static_cast<double>(nr));
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = split_threshold(vals[idx].first, vals[idx + 1].first);
        }
      }
    } else {
      left_counts.assign(static_cast<std::size_t>(n_classes_), 0);
      right_counts.assign(static_cast<std::size_t>(n_classes_), 0);
      for (auto& [v, t] : vals) ++right_counts[static_cast<std::size_t>(t)];
      // Weighted gini via sum of squared counts.
      double left_sq = 0, right_sq = 0;
      for (Index c : right_counts) right_sq += static_cast<double>(c) * static_cast<double>(c);
      for (Index i = 0; i + 1 < n; ++i) {
        auto idx = static_cast<std::size_t>(i);
        auto cls = static_cast<std::size_t>(vals[idx].second);
        left_sq += 2.0 * static_cast<double>(left_counts[cls]) + 1.0;
        right_sq -= 2.0 * static_cast<double>(right_counts[cls]) - 1.0;
        ++left_counts[cls];
        --right_counts[cls];
        if (vals[idx].first == vals[idx + 1].first) continue;
        Index nl = i + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        double score = (static_cast<double>(nl) - left_sq / static_cast<double>(nl)) +
                       (static_cast<double>(nr) - right_sq / static_cast<double>(nr));
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = split_threshold(vals[idx].first, vals[idx + 1].first);
        }
      }
    }
  }

  if (best_feature < 0) return make_leaf(id);

  std::vector<Index> left_rows, right_rows;
  left_rows.reserve(rows.size());
  right_rows.reserve(rows.size());
  for (Index r : rows) {
    if (x(r, best_feature) <= best_threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  nodes_[static_cast<std::size_t>(id)].feature = best_feature;
  nodes_[static_cast<std::size_t>(id)].threshold = best_threshold;
  int left = build(x, y, left_rows, depth + 1, rng);
  nodes_[static_cast<std::size_t>(id)].left = left;
  int right = build(x, y, right_rows, depth + 1, rng);
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

double DecisionTree::predict_row(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes_[static_cast<std::size_t>(node)].value;
}

namespace {

int mtry_for(TaskKind task, int nf) {
  if (task == TaskKind::Classification)
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nf))));
  return static_cast<int>(std::ceil(static_cast<double>(nf) / 3.0));
}

Vector<double> predict_ensemble(const std::vector<DecisionTree>& trees,
                                const Matrix<double>& x, TaskKind task,
                                int n_classes) {
  Vector<double> out(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    if (task == TaskKind::Regression) {
      double sum = 0;
      for (const auto& tree : trees) sum += tree.predict_row(x.row(r));
      out[r] = sum / static_cast<double>(trees.size());
    } else {
      std::vector<Index> votes(static_cast<std::size_t>(n_classes), 0);
      for (const auto& tree : trees)
        ++votes[static_cast<std::size_t>(tree.predict_row(x.row(r)))];
      out[r] = majority_label(votes);
    }
  }
  return out;
}

Vector<double> fit_predict(const Matrix<double>& x_train, const Vector<double>& y_train,
                           const Matrix<double>& x_test, TaskKind task,
                           const ModelKind& model, std::uint64_t seed) {
  int n_classes = task == TaskKind::Classification
                      ? static_cast<int>(y_train.maxCoeff()) + 1
                      : 0;

  if (auto* opt = std::get_if<TreeEnsembleOptions>(&model)) {
    if (opt->n_trees < 1) throw ConfigError("tree ensemble needs n_trees >= 1");
    std::vector<DecisionTree> trees(static_cast<std::size_t>(opt->n_trees));
    int mtry = opt->feature_subsample ? mtry_for(task, static_cast<int>(x_train.cols())) : 0;
    const Index n = x_train.rows();
    for (int i = 0; i < opt->n_trees; ++i) {
      // Per-tree stream so concurrent fitting would match sequential output.
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      if (opt->bootstrap) {
        Matrix<double> xb(n, x_train.cols());
        Vector<double> yb(n);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        for (Index r = 0; r < n; ++r) {
          Index src = pick(rng);
          xb.row(r) = x_train.row(src);
          yb[r] = y_train[src];
        }
        trees[static_cast<std::size_t>(i)].fit(xb, yb, task, opt->max_depth,
                                               opt->min_leaf, mtry, rng);
      } else {
        trees[static_cast<std::size_t>(i)].fit(x_train, y_train, task, opt->max_depth,
                                               opt->min_leaf, mtry, rng);
      }
    }
    return predict_ensemble(trees, x_test, task, n_classes);
  }

  if (auto* opt = std::get_if<SingleTreeOptions>(&model)) {
    std::mt19937_64 rng(derive_seed(seed, "single-tree"));
    std::vector<DecisionTree> trees(1);
    trees[0].fit(x_train, y_train, task, opt->max_depth, opt->min_leaf, 0, rng);
    return predict_ensemble(trees, x_test, task, n_classes);
  }

  const auto& opt = std::get<KNearestOptions>(model);
  if (opt.k < 1) throw ConfigError("k_nearest needs k >= 1");
  Index k = std::min<Index>(opt.k, x_train.rows());
  Vector<double> out(x_test.rows());
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(x_train.rows()));
  for (Index r = 0; r < x_test.rows(); ++r) {
    for (Index i = 0; i < x_train.rows(); ++i)
      dist[static_cast<std::size_t>(i)] = {
          (x_train.row(i) - x_test.row(r)).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    if (task == TaskKind::Regression) {
      double sum = 0;
      for (Index i = 0; i < k; ++i) sum += y_train[dist[static_cast<std::size_t>(i)].second];
      out[r] = sum / static_cast<double>(k);
    } else {
      std::vector<Index> votes(static_cast<std::size_t>(n_classes), 0);
      for (Index i = 0; i < k; ++i)
        ++votes[static_cast<std::size_t>(y_train[dist[static_cast<std::size_t>(i)].second])];
      out[r] = majority_label(votes);
    }
  }
  return out;
}

}  // namespace

UtilityScore fit_predict_score(const Dataset& train, const Dataset& test,
                               const std::vector<int>& selected,
                               const ModelKind& model, std::uint64_t seed) {
  if (selected.empty()) throw DataError("fit_predict_score: empty feature selection");
  if (train.n_features() != test.n_features() || train.task != test.task)
    throw DataError("fit_predict_score: train/test datasets disagree");
  if (train.n_samples() < 2) throw DataError("fit_predict_score: need >= 2 train rows");

  std::vector<int> cols(selected);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  for (int c : cols)
    if (c < 0 || c >= train.n_features())
      throw DataError("fit_predict_score: feature index " + std::to_string(c) +
                      " out of range");

  if (train.task == TaskKind::Classification) {
    bool all_same = true;
    for (Index i = 1; i < train.target.size() && all_same; ++i)
      all_same = (train.target[i] == train.target[0]);
    if (all_same)
      throw DataError("fit_predict_score: degenerate training target (single class)");
  } else {
    double mean = train.target.mean();
    if ((train.target.array() - mean).abs().sum() == 0.0)
      throw DataError("fit_predict_score: degenerate training target (zero variance)");
  }

  Matrix<double> x_train(train.n_samples(), static_cast<Index>(cols.size()));
  Matrix<double> x_test(test.n_samples(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    x_train.col(static_cast<Index>(j)) = train.features.col(cols[j]);
    x_test.col(static_cast<Index>(j)) = test.features.col(cols[j]);
  }

  Vector<double> pred = fit_predict(x_train, train.target, x_test, train.task, model, seed);

  UtilityScore score;
  if (train.task == TaskKind::Classification) {
    std::vector<int> yt(static_cast<std::size_t>(test.target.size()));
    std::vector<int> yp(static_cast<std::size_t>(pred.size()));
    for (Index i = 0; i < test.target.size(); ++i) {
      yt[static_cast<std::size_t>(i)] = static_cast<int>(test.target[i]);
      yp[static_cast<std::size_t>(i)] = static_cast<int>(pred[i]);
    }
    score.value = f1_weighted(yt, yp);
    score.metric = Metric::F1Weighted;
  } else {
    score.value = one_minus_rae(test.target, pred);
    score.metric = Metric::OneMinusRAE;
  }
  score.clamped = score.value < 0.0 || score.value > 1.0;
  return score;
}

std::vector<int> kbest_baseline(const Dataset& ds, int k) {
  if (k < 1 || k > ds.n_features())
    throw ConfigError("kbest_baseline: k out of range 1.." +
                      std::to_string(ds.n_features()));
  double ty_mean = ds.target.mean();
  Vector<double> ty = ds.target.array() - ty_mean;
  double ty_norm = ty.norm();

  std::vector<std::pair<double, int>> ranked;  // (-|r|, index) so sort is one pass
  ranked.reserve(static_cast<std::size_t>(ds.n_features()));
  for (Index c = 0; c < ds.n_features(); ++c) {
    Vector<double> col = ds.features.col(c).array() - ds.features.col(c).mean();
    double cn = col.norm();
    double r = 0.0;
    if (cn > 0 && ty_norm > 0) r = col.dot(ty) / (cn * ty_norm);
    ranked.emplace_back(-std::abs(r), static_cast<int>(c));
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(ranked[static_cast<std::size_t>(i)].second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fsgen
