#include <doctest.h>

#include "fsgen/metrics.hpp"

using namespace fsgen;

TEST_CASE("perfect classification scores 1") {
  CHECK(f1_weighted({0, 1, 2, 1}, {0, 1, 2, 1}) == doctest::Approx(1.0));
  CHECK(f1_weighted({5, 5, 7}, {5, 5, 7}) == doctest::Approx(1.0));
}

TEST_CASE("balanced binary half-errors score 0.5") {
  // Both classes: precision = recall = 0.5, so per-class F1 = 0.5 each.
  CHECK(f1_weighted({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("all-majority prediction on a 3:1 split") {
  // class0: precision 3/4, recall 1, F1 = 6/7; class1: F1 = 0.
  // Weighted: (3*(6/7) + 1*0) / 4 = 9/14.
  CHECK(f1_weighted({0, 0, 0, 1}, {0, 0, 0, 0}) == doctest::Approx(9.0 / 14.0));
}

TEST_CASE("classes absent from y_true carry zero weight") {
  // Prediction invents class 2, which has no y_true support.
  // class0: p=1, r=1/2, F1=2/3; class1: p=1, r=1, F1=1; weighted (2*(2/3)+2*1)/4.
  double v = f1_weighted({0, 0, 1, 1}, {0, 2, 1, 1});
  CHECK(v == doctest::Approx((2.0 * (2.0 / 3.0) + 2.0) / 4.0));
}

TEST_CASE("f1 rejects mismatched lengths") {
  CHECK_THROWS_AS(f1_weighted({0, 1}, {0}), DataError);
}

TEST_CASE("regression metric is 1 on exact prediction") {
  Vector<double> y(3);
  y << 1, 2, 3;
  CHECK(one_minus_rae(y, y) == doctest::Approx(1.0));
}

TEST_CASE("predicting the mean scores 0") {
  Vector<double> y(4), p(4);
  y << 1, 2, 3, 6;
  p.setConstant(3.0);
  CHECK(one_minus_rae(y, p) == doctest::Approx(0.0));
}

TEST_CASE("one absolute error against the mean spread") {
  Vector<double> y(3), p(3);
  y << 1, 2, 3;
  p << 1, 2, 4;
  CHECK(one_minus_rae(y, p) == doctest::Approx(0.5));
}

TEST_CASE("worse-than-mean predictors go negative") {
  Vector<double> y(3), p(3);
  y << 1, 2, 3;
  p << 10, 10, 10;
  CHECK(one_minus_rae(y, p) < 0.0);
}

TEST_CASE("regression metric rejects degenerate input") {
  Vector<double> y(3), p(2);
  y << 1, 2, 3;
  p << 1, 2;
  CHECK_THROWS_AS(one_minus_rae(y, p), DataError);

  Vector<double> c(3), q(3);
  c.setConstant(2.0);
  q << 1, 2, 3;
  CHECK_THROWS_AS(one_minus_rae(c, q), DataError);

  Vector<double> one(1), pone(1);
  one << 1;
  pone << 1;
  CHECK_THROWS_AS(one_minus_rae(one, pone), DataError);
}

TEST_CASE("utility clamping records out-of-range raw values") {
  UtilityScore s{-0.3, Metric::OneMinusRAE, true};
  CHECK(s.clamped01() == 0.0);
  s.value = 1.7;
  CHECK(s.clamped01() == 1.0);
  s.value = 0.42;
  CHECK(s.clamped01() == 0.42);
}

TEST_CASE("metric names") {
  CHECK(to_string(Metric::F1Weighted) == "f1_weighted");
  CHECK(to_string(Metric::OneMinusRAE) == "one_minus_rae");
}
