#include <doctest.h>

#include "fsgen/trees.hpp"

#include <algorithm>

using namespace fsgen;

namespace {

Dataset tiny_classification() {
  // One informative column (0): class = [x0 > 0]. Column 1 is a fixed
  // uninformative pattern.
  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.features.resize(8, 2);
  ds.target.resize(8);
  double xs[8] = {-4, -3, -2, -1, 1, 2, 3, 4};
  for (Index r = 0; r < 8; ++r) {
    ds.features(r, 0) = xs[r];
    ds.features(r, 1) = static_cast<double>(r % 3);
    ds.target[r] = xs[r] > 0 ? 1.0 : 0.0;
  }
  ds.feature_names = {"a", "b"};
  return ds;
}

}  // namespace

TEST_CASE("a depth-1 tree separates a threshold rule exactly") {
  Dataset ds = tiny_classification();
  UtilityScore s = fit_predict_score(ds, ds, {0, 1}, SingleTreeOptions{1, 1}, 0);
  CHECK(s.metric == Metric::F1Weighted);
  CHECK(s.value == doctest::Approx(1.0));
  CHECK_FALSE(s.clamped);
}

TEST_CASE("selection is consumed as a set") {
  auto [ds, truth] = make_synthetic_planted({3, 5, 80, 0.1, 5});
  auto [train, test] = split_ab(ds, 0.75, 3);
  UtilityScore a = fit_predict_score(train, test, {4, 1}, TreeEnsembleOptions{}, 9);
  UtilityScore b = fit_predict_score(train, test, {1, 4}, TreeEnsembleOptions{}, 9);
  UtilityScore c = fit_predict_score(train, test, {1, 4, 4}, TreeEnsembleOptions{}, 9);
  CHECK(a.value == b.value);
  CHECK(a.value == c.value);
}

TEST_CASE("scoring is deterministic in the seed") {
  auto [ds, truth] = make_synthetic_planted({3, 5, 80, 0.1, 6});
  auto [train, test] = split_ab(ds, 0.75, 3);
  UtilityScore a = fit_predict_score(train, test, {0, 2, 5}, TreeEnsembleOptions{}, 31);
  UtilityScore b = fit_predict_score(train, test, {0, 2, 5}, TreeEnsembleOptions{}, 31);
  CHECK(a.value == b.value);
}

TEST_CASE("fit_predict_score input validation") {
  Dataset ds = tiny_classification();
  CHECK_THROWS_AS(fit_predict_score(ds, ds, {}, TreeEnsembleOptions{}, 0), DataError);
  CHECK_THROWS_AS(fit_predict_score(ds, ds, {2}, TreeEnsembleOptions{}, 0), DataError);
  CHECK_THROWS_AS(fit_predict_score(ds, ds, {-1}, TreeEnsembleOptions{}, 0), DataError);

  Dataset degenerate = ds;
  degenerate.target.setZero();
  CHECK_THROWS_AS(fit_predict_score(degenerate, ds, {0}, TreeEnsembleOptions{}, 0),
                  DataError);

  Dataset reg = ds;
  reg.task = TaskKind::Regression;
  CHECK_THROWS_AS(fit_predict_score(reg, ds, {0}, TreeEnsembleOptions{}, 0), DataError);
}

TEST_CASE("planted features beat fake features under the ensemble") {
  auto [ds, truth] = make_synthetic_planted({5, 10, 400, 0.0, 12});
  auto [train, test] = split_ab(ds, 0.75, 1);

  std::vector<int> fakes;
  for (int c = 0; c < ds.n_features() && static_cast<int>(fakes.size()) < 5; ++c)
    if (std::find(truth.informative.begin(), truth.informative.end(), c) ==
        truth.informative.end())
      fakes.push_back(c);

  UtilityScore real = fit_predict_score(train, test, truth.informative,
                                        TreeEnsembleOptions{}, 77);
  UtilityScore fake = fit_predict_score(train, test, fakes, TreeEnsembleOptions{}, 77);
  CHECK(real.value > fake.value);
  CHECK(real.value > 0.3);
  CHECK(fake.value < 0.2);
}

TEST_CASE("an unbagged single-tree ensemble equals the single tree") {
  auto [ds, truth] = make_synthetic_planted({2, 2, 60, 0.1, 8});
  auto [train, test] = split_ab(ds, 0.7, 2);
  TreeEnsembleOptions one;
  one.n_trees = 1;
  one.bootstrap = false;
  one.feature_subsample = false;
  one.max_depth = 6;
  one.min_leaf = 2;
  UtilityScore a = fit_predict_score(train, test, {0, 1, 2, 3}, one, 5);
  UtilityScore b = fit_predict_score(train, test, {0, 1, 2, 3},
                                     SingleTreeOptions{6, 2}, 5);
  CHECK(a.value == b.value);

  Dataset cls = tiny_classification();
  UtilityScore c = fit_predict_score(cls, cls, {0, 1}, one, 5);
  UtilityScore d = fit_predict_score(cls, cls, {0, 1}, SingleTreeOptions{6, 2}, 5);
  CHECK(c.value == d.value);
}

TEST_CASE("k-nearest classifies by local vote") {
  Dataset ds = tiny_classification();
  UtilityScore s = fit_predict_score(ds, ds, {0}, KNearestOptions{1}, 0);
  CHECK(s.value == doctest::Approx(1.0));
  UtilityScore s3 = fit_predict_score(ds, ds, {0}, KNearestOptions{3}, 0);
  CHECK(s3.value == doctest::Approx(1.0));
}

TEST_CASE("k-nearest regression averages neighbours") {
  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.features.resize(4, 1);
  ds.features << 0, 1, 10, 11;
  ds.target.resize(4);
  ds.target << 0, 2, 10, 12;
  ds.feature_names = {"a"};

  Dataset q = ds;
  UtilityScore s = fit_predict_score(ds, q, {0}, KNearestOptions{2}, 0);
  // Every query's 2-NN average is 1 or 11, so |err| = 1 per row (total 4);
  // deviations from the mean 6 sum to 20.
  CHECK(s.value == doctest::Approx(1.0 - 4.0 / 20.0));
}

TEST_CASE("ensemble handles a multiclass vote deterministically") {
  Dataset ds;
  ds.task = TaskKind::Classification;
  ds.features.resize(12, 2);
  ds.target.resize(12);
  for (Index r = 0; r < 12; ++r) {
    int cls = static_cast<int>(r / 4);
    ds.features(r, 0) = static_cast<double>(cls * 10) + static_cast<double>(r % 4);
    ds.features(r, 1) = static_cast<double>(r % 2);
    ds.target[r] = cls;
  }
  ds.feature_names = {"a", "b"};
  TreeEnsembleOptions opt;
  opt.n_trees = 15;
  UtilityScore s = fit_predict_score(ds, ds, {0, 1}, opt, 4);
  CHECK(s.value == doctest::Approx(1.0));
}

TEST_CASE("kbest recovers planted columns on noiseless data") {
  auto [ds, truth] = make_synthetic_planted({4, 30, 800, 0.0, 13});
  CHECK(kbest_baseline(ds, 4) == truth.informative);
}

TEST_CASE("kbest with k equal to the feature count returns every column") {
  auto [ds, truth] = make_synthetic_planted({2, 3, 50, 0.1, 14});
  std::vector<int> all = kbest_baseline(ds, 5);
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("constant columns score zero correlation and lose ties to lower indices") {
  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.features.resize(6, 3);
  ds.target.resize(6);
  for (Index r = 0; r < 6; ++r) {
    ds.features(r, 0) = 3.0;                       // constant
    ds.features(r, 1) = static_cast<double>(r);    // perfectly correlated
    ds.features(r, 2) = static_cast<double>(r % 2);
    ds.target[r] = static_cast<double>(r);
  }
  ds.feature_names = {"c", "lin", "par"};
  CHECK(kbest_baseline(ds, 1) == std::vector<int>{1});
  CHECK(kbest_baseline(ds, 2) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(kbest_baseline(ds, 0), ConfigError);
  CHECK_THROWS_AS(kbest_baseline(ds, 4), ConfigError);
}

TEST_CASE("model kinds describe themselves") {
  CHECK(to_string(ModelKind{TreeEnsembleOptions{}}) ==
        "tree_ensemble(n_trees=50,max_depth=12,min_leaf=2)");
  CHECK(to_string(ModelKind{SingleTreeOptions{}}) ==
        "single_tree(max_depth=12,min_leaf=2)");
  CHECK(to_string(ModelKind{KNearestOptions{}}) == "k_nearest(k=5)");
}
