#include "doctest.h"
#include "support.hpp"

#include "ordcal/metrics.hpp"
#include "ordcal/rng.hpp"
#include "ordcal/simulation.hpp"

#include <cmath>

using namespace ordcal;
using testing::sample;

namespace {

constexpr double kPi = 3.14159265358979323846;

double normal_pdf(double x, double mu) { return std::exp(-0.5 * (x - mu) * (x - mu)) / std::sqrt(2 * kPi); }

// Posterior class probabilities at x straight from Bayes' rule.
Eigen::VectorXd bayes_posterior(const Scenario& s, const Eigen::VectorXd& x) {
  Eigen::VectorXd w(s.K);
  for (int k = 0; k < s.K; ++k) {
    double f = s.priors(k);
    for (int q = 0; q < s.Q; ++q) f *= normal_pdf(x(q), s.means(q, k));
    w(k) = f;
  }
  return w / w.sum();
}

}  // namespace

TEST_CASE("scenario registry") {
  const auto& all = builtin_scenarios();
  CHECK(all.size() == 20);
  int mlr_count = 0;
  for (const auto& s : all) {
    mlr_count += s.form == TruthForm::mlr;
    CHECK(s.priors.sum() == doctest::Approx(1.0));
    CHECK(s.means.rows() == s.Q);
    CHECK(s.means.cols() == s.K);
  }
  CHECK(mlr_count == 11);

  const auto& s1 = find_scenario("MLR-1");
  CHECK(s1.Q == 4);
  CHECK(s1.K == 3);
  CHECK(s1.priors.isApprox(Eigen::Vector3d::Constant(1.0 / 3)));
  CHECK(s1.means.row(0).isApprox(Eigen::RowVector3d(0.0, 0.4, 0.8)));

  // published values use the P(Y <= k) convention; stored values model P(Y >= k+1)
  const auto& c2 = find_scenario("CLPO-2");
  CHECK((-c2.alpha).isApprox(Eigen::Vector2d(0.92, 2.80)));
  CHECK((-c2.beta).isApprox(Eigen::Vector4d(-0.53, -0.39, -0.53, -0.39)));
  CHECK(c2.priors.isApprox(Eigen::Vector3d(0.55, 0.30, 0.15)));

  CHECK(&find_scenario("mlr3") == &find_scenario("MLR-3"));
  CHECK(&find_scenario("clpo_1") == &find_scenario(TruthForm::clpo, 1));
  CHECK_THROWS_AS(find_scenario("MLR-12"), DataError);
}

TEST_CASE("generation") {
  SUBCASE("deterministic") {
    const auto a = sample("MLR-9", 500, 42);
    const auto b = sample("MLR-9", 500, 42);
    const auto c = sample("MLR-9", 500, 43);
    CHECK(a.data.predictors == b.data.predictors);
    CHECK(a.data.outcomes == b.data.outcomes);
    CHECK(a.truth.values == b.truth.values);
    CHECK(a.data.predictors != c.data.predictors);
    CHECK(a.generator == std::string(CounterRng::id));
    CHECK(a.seed == 42);
  }
  SUBCASE("binary predictors") {
    const auto s = sample("MLR-10", 1000, 1);
    CHECK((s.data.predictors.array() * (1 - s.data.predictors.array())).abs().maxCoeff() == 0);
  }
  SUBCASE("large-sample frequencies and means") {
    const auto& sc = find_scenario("MLR-2");
    const auto s = generate(sc, 200000, 7);
    const auto counts = category_counts(s.data.outcomes, 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(counts(k) / 200000.0 - sc.priors(k)) < 0.005);
    const auto s1 = sample("MLR-1", 200000, 8);
    double sum = 0;
    int m = 0;
    for (Eigen::Index i = 0; i < s1.data.n(); ++i)
      if (s1.data.outcomes(i) == 3) sum += s1.data.predictors(i, 0), ++m;
    CHECK(std::abs(sum / m - 0.8) < 0.01);
  }
  SUBCASE("normal deviates") {
    CounterRng rng(5);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = rng.normal();
      s += z;
      s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1) < 0.01);
  }
}

TEST_CASE("true risks") {
  SUBCASE("Bayes rule at the origin") {
    const auto& s = find_scenario("MLR-1");
    const Eigen::VectorXd direct = bayes_posterior(s, Eigen::VectorXd::Zero(4));
    // proportional to (0.4378, 0.3410, 0.1611), the softmax terms of (0, -0.25, -1)
    CHECK(direct(1) / direct(0) == doctest::Approx(0.3410 / 0.4378).epsilon(1e-3));
    CHECK(direct(2) / direct(0) == doctest::Approx(0.1611 / 0.4378).epsilon(1e-3));
    const auto P = true_risks(s, Eigen::MatrixXd::Zero(1, 4));
    CHECK(testing::max_abs_diff(P.values.row(0).transpose(), direct) < 1e-14);
  }
  SUBCASE("Bayes rule elsewhere") {
    for (const char* id : {"MLR-3", "MLR-6", "MLR-11"}) {
      const auto& s = find_scenario(id);
      const auto sim = generate(s, 20, 3);
      const auto P = true_risks(s, sim.data.predictors);
      for (Eigen::Index i = 0; i < 20; ++i)
        CHECK(testing::max_abs_diff(P.values.row(i).transpose(),
                                    bayes_posterior(s, sim.data.predictors.row(i).transpose())) < 1e-12);
    }
  }
  SUBCASE("binary predictors follow prevalence ratios") {
    const auto& s = find_scenario("MLR-9");
    Eigen::MatrixXd x(1, 4);
    x << 1, 0, 1, 0;
    Eigen::Vector3d w;
    for (int k = 0; k < 3; ++k) {
      w(k) = s.priors(k);
      for (int q = 0; q < 4; ++q) w(k) *= x(0, q) == 1 ? s.means(q, k) : 1 - s.means(q, k);
    }
    CHECK(testing::max_abs_diff(true_risks(s, x).values.row(0).transpose(), w / w.sum()) < 1e-14);
  }
  SUBCASE("analytic multinomial form") {
    const auto t = mlr_truth(find_scenario("MLR-1"));
    CHECK(t.alpha(0) == doctest::Approx(-0.25));
    CHECK(t.alpha(1) == doctest::Approx(-1.00));
    CHECK(t.B(0, 0) == doctest::Approx(0.4));
    CHECK(t.B(0, 1) == doctest::Approx(0.8));
    CHECK(t.B(1, 0) == doctest::Approx(0.3));
    CHECK(t.B(1, 1) == doctest::Approx(0.6));
  }
  SUBCASE("identical means give uniform risks") {
    Scenario s = find_scenario("MLR-1");
    s.means.setConstant(0.3);
    const auto P = true_risks(s, Eigen::MatrixXd::Random(10, 4));
    CHECK(testing::max_abs_diff(P.values, Eigen::MatrixXd::Constant(10, 3, 1.0 / 3)) < 1e-15);
  }
  SUBCASE("rows sum to one") {
    for (const auto& s : builtin_scenarios()) {
      const auto sim = generate(s, 200, 1);
      CHECK((sim.truth.values.rowwise().sum().array() - 1).abs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("cumulative truth matches local frequencies") {
    const auto& s = find_scenario("CLPO-2");
    const auto sim = generate(s, 200000, 4);
    const Eigen::VectorXd score = sim.data.predictors * s.beta;
    for (double centre : {-0.5, 0.0, 0.5, 1.0}) {
      Eigen::Vector3d freq = Eigen::Vector3d::Zero(), risk = Eigen::Vector3d::Zero();
      int m = 0;
      for (Eigen::Index i = 0; i < sim.data.n(); ++i) {
        if (std::abs(score(i) - centre) > 0.05) continue;
        freq(sim.data.outcomes(i) - 1) += 1;
        risk += sim.truth.values.row(i).transpose();
        ++m;
      }
      REQUIRE(m > 2000);
      freq /= m;
      risk /= m;
      for (int k = 0; k < 3; ++k) CHECK(std::abs(freq(k) - risk(k)) < 4 * std::sqrt(0.25 / m));
    }
  }
}

TEST_CASE("refits on large simulated samples") {
  SUBCASE("cumulative truth is recovered") {
    const auto& s = find_scenario("CLPO-1");
    const auto sim = generate(s, 200000, 10);
    const auto m = fit(sim.data, cl_po());
    for (int q = 0; q < 4; ++q) CHECK(std::abs(m.coefficients(q, 0) - s.beta(q)) < 0.02);
    CHECK(std::abs(m.coefficients(0, 0) - 0.55) < 0.02);
    CHECK(std::abs(m.coefficients(1, 0) - 0.41) < 0.02);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(m.intercepts(j) - s.alpha(j)) < 0.02);
  }
  SUBCASE("noise predictors vanish") {
    const auto sim = sample("MLR-11", 200000, 2);
    const auto m = fit(sim.data, mlr());
    CHECK(m.coefficients.bottomRows(4).cwiseAbs().maxCoeff() < 0.02);
  }
  SUBCASE("equidistant means give adjacent proportional odds") {
    double previous = 1;
    for (Eigen::Index n : {2000, 200000}) {
      const auto sim = sample("MLR-1", n, 12);
      const auto m = fit(sim.data, ac_po());
      const double e = rmspe(predict_probs(m, sim.data.predictors), sim.truth);
      CHECK(e < previous);
      previous = e;
    }
    CHECK(previous < 0.005);
  }
}
