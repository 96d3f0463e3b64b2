#include "doctest.h"
#include "support.hpp"

#include "ordcal/metrics.hpp"

#include <random>

using namespace ordcal;

namespace {

// Quadratic-time C statistic of score for y == hi against y == lo.
double brute_c(const Eigen::VectorXd& s, const Eigen::VectorXi& y, int lo, int hi) {
  double credit = 0, pairs = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (y(i) != hi) continue;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      if (y(j) != lo) continue;
      pairs += 1;
      credit += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
    }
  }
  return credit / pairs;
}

}  // namespace

TEST_CASE("expected outcome score") {
  Eigen::MatrixXd P(3, 3);
  P << 1, 0, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.2, 0.3, 0.5;
  const Eigen::VectorXd s = expected_outcome_score(P);
  CHECK(s(0) == doctest::Approx(1));
  CHECK(s(1) == doctest::Approx(2));
  CHECK(s(2) == doctest::Approx(2.3));
}

TEST_CASE("ordinal C statistic") {
  Eigen::VectorXi y(6);
  y << 1, 1, 2, 2, 3, 3;
  Eigen::VectorXd s(6);
  s << 0.1, 0.2, 0.5, 0.6, 0.8, 0.9;
  CHECK(orc_detail(s, y, 3).value == 1.0);
  CHECK(orc_detail(Eigen::VectorXd::Constant(6, 2.0), y, 3).value == 0.5);
  CHECK(orc_detail(-s, y, 3).value == 0.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> lab(1, 4);
  Eigen::VectorXd r(300);
  Eigen::VectorXi yy(300);
  for (int i = 0; i < 300; ++i) {
    yy(i) = lab(rng);
    r(i) = std::round(4 * (z(rng) + 0.4 * yy(i))) / 4;  // coarse grid forces ties
  }
  SUBCASE("pairwise against brute force") {
    double mean = 0;
    for (int lo = 1; lo <= 4; ++lo)
      for (int hi = lo + 1; hi <= 4; ++hi) {
        const double c = brute_c(r, yy, lo, hi);
        CHECK(pairwise_c(r, yy, lo, hi) == doctest::Approx(c).epsilon(1e-12));
        mean += c / 6;
      }
    const auto res = orc_detail(r, yy, 4);
    CHECK(res.value == doctest::Approx(mean).epsilon(1e-12));
    CHECK(res.pairs_used == 6);
  }
  SUBCASE("rank invariance") {
    const Eigen::VectorXd t = r.array().exp() * 3 + 1;
    CHECK(orc_detail(t, yy, 4).value == doctest::Approx(orc_detail(r, yy, 4).value).epsilon(1e-14));
  }
  SUBCASE("two categories give the binary C") {
    const auto sim = testing::sample("MLR-2", 400, 3);
    Dataset d = sim.data;
    for (Eigen::Index i = 0; i < d.n(); ++i) d.outcomes(i) = d.outcomes(i) == 1 ? 1 : 2;
    d.K = 2;
    const auto P = predict_probs(fit(d, mlr()), d.predictors);
    CHECK(orc(P, d.outcomes) ==
          doctest::Approx(brute_c(P.values.col(1), d.outcomes, 1, 2)).epsilon(1e-12));
  }
  SUBCASE("absent category") {
    Eigen::VectorXi y3(4);
    y3 << 1, 1, 3, 3;
    Eigen::VectorXd s3(4);
    s3 << 1, 2, 3, 4;
    const auto res = orc_detail(s3, y3, 3);
    CHECK(res.pairs_used == 1);
    CHECK(res.value == 1.0);
    CHECK(!res.warnings.empty());
    CHECK(std::isnan(pairwise_c(s3, y3, 1, 2)));
  }
}

TEST_CASE("root mean squared prediction error") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 1, 0;
  b << 0, 1;
  CHECK(rmspe(a, b) == doctest::Approx(1.0));
  CHECK(rmspe(a, a) == 0.0);

  const Eigen::MatrixXd p = (Eigen::MatrixXd::Random(50, 3).array() + 1) / 2;
  const Eigen::MatrixXd q = (Eigen::MatrixXd::Random(50, 3).array() + 1) / 2;
  CHECK(rmspe(p, q) == rmspe(q, p));
  CHECK(rmspe(p, q) >= 0);
  CHECK(rmspe(p, q) <= 1);
  CHECK_THROWS_AS(rmspe(p, Eigen::MatrixXd(q.leftCols(2))), DataError);
}
