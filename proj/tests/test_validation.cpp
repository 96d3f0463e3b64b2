#include "doctest.h"
#include "support.hpp"

#include "ordcal/validation.hpp"

using namespace ordcal;
using testing::sample;

namespace {

void check_same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::isnan(a(i))) CHECK(std::isnan(b(i)));
    else CHECK(a(i) == b(i));
  }
}

void check_same(const Evaluation& a, const Evaluation& b) {
  check_same(a.category_intercept, b.category_intercept);
  check_same(a.category_slope, b.category_slope);
  check_same(a.dichotomy_intercept, b.dichotomy_intercept);
  check_same(a.dichotomy_slope, b.dichotomy_slope);
  check_same(a.lp_intercept, b.lp_intercept);
  check_same(a.lp_slope, b.lp_slope);
  CHECK(a.rmspe == b.rmspe);
  CHECK(a.orc == b.orc);
}

}  // namespace

TEST_CASE("evaluation") {
  const auto sim = sample("MLR-6", 3000, 3);
  const auto m = fit(sim.data, slm());
  const auto e = evaluate(m, sim.data, &sim.truth);
  CHECK(e.category_slope.size() == 4);
  CHECK(e.dichotomy_slope.size() == 3);
  CHECK(e.lp_slope.size() == 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(e.lp_slope(j) - 1) < 1e-3);
    CHECK(std::abs(e.lp_intercept(j)) < 1e-3);
  }
  CHECK(e.dichotomy_slope(2) == e.category_slope(3));
  CHECK(e.eci >= 0);
  CHECK(e.rmspe > 0);
  CHECK(e.orc > 0.5);

  const auto bare = evaluate(m, sim.data, nullptr, {false, false, RecalSetup::mlr_reference});
  CHECK(std::isnan(bare.eci));
  CHECK(std::isnan(bare.rmspe));
  CHECK(std::isnan(bare.lp_slope(0)));
  CHECK(bare.orc == e.orc);
}

TEST_CASE("large-sample study") {
  LargeSampleOptions o;
  o.n = 5000;
  o.seed = 4;
  const auto rows = large_sample_study({find_scenario("MLR-1")}, {mlr(), cl_po()}, o);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.converged);
    CHECK(r.n_dev == 5000);
    CHECK(r.replicates == 1);
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(r.mean.lp_slope(j) - 1) < 1e-3);
  }
  CHECK(rows[0].mean.rmspe < rows[1].mean.rmspe + 0.05);
}

TEST_CASE("small-sample study") {
  SUBCASE("develop equals validate gives apparent performance") {
    SmallSampleOptions s;
    s.n_dev = 3000;
    s.n_eval = 3000;
    s.reps = 1;
    s.seed = 9;
    s.eval_seed = 9;
    s.threads = 1;
    LargeSampleOptions l;
    l.n = 3000;
    l.seed = 9;
    l.evaluation = s.evaluation;
    const auto& sc = find_scenario("MLR-2");
    const auto small = small_sample_study(sc, main_families(), s);
    const auto large = large_sample_study({sc}, main_families(), l);
    REQUIRE(small.size() == large.size());
    for (size_t f = 0; f < small.size(); ++f) {
      CHECK(small[f].replicates == 1);
      check_same(small[f].mean, large[f].mean);
    }
  }
  SUBCASE("thread count does not change results") {
    SmallSampleOptions s;
    s.n_dev = 100;
    s.n_eval = 2000;
    s.reps = 6;
    s.seed = 3;
    s.threads = 1;
    const auto& sc = find_scenario("MLR-1");
    const auto a = small_sample_study(sc, {mlr(), ac_po()}, s);
    s.threads = 3;
    const auto b = small_sample_study(sc, {mlr(), ac_po()}, s);
    for (size_t f = 0; f < a.size(); ++f) {
      REQUIRE(a[f].per_replicate.size() == b[f].per_replicate.size());
      for (size_t r = 0; r < a[f].per_replicate.size(); ++r) check_same(a[f].per_replicate[r], b[f].per_replicate[r]);
      check_same(a[f].mean, b[f].mean);
    }
  }
  SUBCASE("failures and redraws are counted") {
    SmallSampleOptions s;
    s.n_dev = 30;
    s.n_eval = 1000;
    s.reps = 12;
    s.threads = 2;
    s.fit.max_iterations = 1;
    const auto rows = small_sample_study(find_scenario("MLR-8"), {mlr()}, s);
    CHECK(rows[0].redraws > 0);
    CHECK(rows[0].failures == 12);
    CHECK(rows[0].replicates == 0);
    CHECK(rows[0].failure_log.size() == 12);
    CHECK(!rows[0].mean.category_slope.allFinite());
  }
}

TEST_CASE("bootstrap") {
  const auto sim = sample("MLR-2", 400, 5);
  SUBCASE("no resamples") {
    BootstrapOptions o;
    o.B = 0;
    const auto r = bootstrap_correct(sim.data, cl_po(), o);
    REQUIRE(!r.metrics.empty());
    for (const auto& m : r.metrics) {
      CHECK(m.optimism == 0);
      CHECK(m.corrected == m.apparent);
    }
  }
  SUBCASE("reproducible and thread independent") {
    BootstrapOptions o;
    o.B = 20;
    o.seed = 8;
    o.threads = 1;
    const auto a = bootstrap_correct(sim.data, ac_po(), o);
    o.threads = 4;
    const auto b = bootstrap_correct(sim.data, ac_po(), o);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (size_t i = 0; i < a.metrics.size(); ++i) {
      CHECK(a.metrics[i].name == b.metrics[i].name);
      CHECK(a.metrics[i].corrected == b.metrics[i].corrected);
    }
    // 3 categories, 2 dichotomies, 2 linear predictors, each with two values, plus ORC
    CHECK(a.metrics.size() == 15);
    CHECK(a.metrics.back().name == "ORC");
  }
  SUBCASE("overfitting shows as positive optimism") {
    const auto big = sample("MLR-2", 5000, 6);
    BootstrapOptions o;
    o.B = 40;
    const auto r = bootstrap_correct(big.data, mlr(), o);
    const auto& orc = r.metrics.back();
    CHECK(orc.corrected < orc.apparent);
  }
}

TEST_CASE("performance table layout") {
  const std::vector<std::string> expected{
      "scenario",      "model",         "n_dev",         "n_eval",        "replicates",
      "failures",      "redraws",       "excluded_slopes", "y1_intercept", "y1_slope",
      "y2_intercept",  "y2_slope",      "y3_intercept",  "y3_slope",      "y_ge2_intercept",
      "y_ge2_slope",   "y_ge3_intercept", "y_ge3_slope", "lp1_intercept", "lp1_slope",
      "lp2_intercept", "lp2_slope",     "eci",           "rmspe",         "orc"};
  CHECK(performance_columns(3) == expected);
  PerformanceRow row;
  row.scenario_id = "MLR-1";
  row.spec = cl_po();
  row.mean.category_intercept = row.mean.category_slope = Eigen::VectorXd::Constant(3, 0.5);
  row.mean.dichotomy_intercept = row.mean.dichotomy_slope = Eigen::VectorXd::Constant(2, 0.5);
  row.mean.lp_intercept = row.mean.lp_slope = Eigen::VectorXd::Constant(2, 0.5);
  const auto v = performance_values(row);
  CHECK(v.size() == expected.size());
  CHECK(v[1] == "cl-po");
  CHECK(v.back() == "NA");
}
