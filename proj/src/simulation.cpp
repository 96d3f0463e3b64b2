#include "ordcal/simulation.hpp"
#include "ordcal/links.hpp"
#include "ordcal/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace ordcal {

namespace {

using Rows = std::vector<std::vector<double>>;

Eigen::MatrixXd means_of(const Rows& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (size_t q = 0; q < rows.size(); ++q)
    for (size_t k = 0; k < rows[q].size(); ++k)
      m(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) = rows[q][k];
  return m;
}

Eigen::VectorXd vec(std::vector<double> v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Scenario mlr_scenario(int number, PredictorKind kind, std::vector<double> priors, const Rows& means,
                      double orc, std::string description) {
  Scenario s;
  s.id = "MLR-" + std::to_string(number);
  s.form = TruthForm::mlr;
  s.number = number;
  s.means = means_of(means);
  s.Q = static_cast<int>(s.means.rows());
  s.K = static_cast<int>(s.means.cols());
  s.kinds.assign(static_cast<size_t>(s.Q), kind);
  s.priors = vec(std::move(priors));
  s.nominal_orc = orc;
  s.description = std::move(description);
  return s;
}

// CLPO truth over the predictor mixture of an MLR scenario.
Scenario clpo_scenario(int number, const Scenario& mixture, std::vector<double> priors,
                       std::vector<double> alpha, std::vector<double> beta, double orc,
                       std::string description) {
  Scenario s = mixture;
  s.id = "CLPO-" + std::to_string(number);
  s.form = TruthForm::clpo;
  s.number = number;
  s.priors = vec(std::move(priors));
  s.alpha = vec(std::move(alpha));
  s.beta = vec(std::move(beta));
  s.nominal_orc = orc;
  s.description = std::move(description);
  return s;
}

std::vector<double> negate(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

std::vector<Scenario> make_registry() {
  const auto C = PredictorKind::continuous;
  const auto Bn = PredictorKind::binary;
  const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const std::vector<double> imb{0.55, 0.30, 0.15};
  const std::vector<double> four{0.40, 0.25, 0.20, 0.15};
  const Rows eq{{0.0, 0.4, 0.8}, {0.0, 0.3, 0.6}, {0.0, 0.4, 0.8}, {0.0, 0.3, 0.6}};
  const Rows neq{{0.0, 0.7, 0.8}, {0.0, 0.6, 0.6}, {0.0, 0.5, 0.8}, {0.0, 0.1, 0.6}};
  const Rows m7{{0.0, 0.0, 0.6, 0.6}, {0.0, 0.4, 0.4, 0.5}, {0.1, 0.0, 0.6, 0.7}};

  std::vector<Scenario> r;
  r.reserve(20);
  r.push_back(mlr_scenario(1, C, third, eq, 0.74, "balanced, equidistant means"));
  r.push_back(mlr_scenario(2, C, imb, eq, 0.74, "imbalanced, equidistant means"));
  r.push_back(mlr_scenario(3, C, third, neq, 0.74, "balanced, non-equidistant means"));
  r.push_back(mlr_scenario(4, C, imb, neq, 0.74, "imbalanced, non-equidistant means"));
  r.push_back(mlr_scenario(5, C, imb,
                           {{0.0, 0.7, 0.8}, {0.0, 0.7, 0.6}, {0.0, 0.0, 1.0}, {0.3, 0.0, 0.3}},
                           0.74, "highly non-equidistant means"));
  r.push_back(mlr_scenario(6, C, four,
                           {{0.0, 0.0, 1.0, 1.0}, {0.0, 0.8, 0.8, 0.9}, {0.2, 0.0, 0.9, 1.0}},
                           0.74, "K=4, Q=3"));
  r.push_back(mlr_scenario(7, C, four, m7, 0.66, "K=4, Q=3, lower discrimination"));
  r.push_back(mlr_scenario(8, C, {0.45, 0.30, 0.20, 0.05}, m7, 0.66,
                           "K=4, Q=3, lower discrimination, rare top category"));
  r.push_back(mlr_scenario(9, Bn, imb,
                           {{0.20, 0.55, 0.58}, {0.20, 0.50, 0.50}, {0.20, 0.45, 0.58},
                            {0.20, 0.25, 0.50}},
                           0.74, "4 binary predictors"));
  r.push_back(mlr_scenario(10, Bn, four,
                           {{0.20, 0.20, 0.65, 0.65}, {0.20, 0.40, 0.40, 0.60},
                            {0.25, 0.20, 0.60, 0.70}},
                           0.74, "3 binary predictors, K=4"));
  {
    Rows noise = neq;
    for (int q = 0; q < 4; ++q) noise.push_back({0.0, 0.0, 0.0});
    r.push_back(mlr_scenario(11, C, imb, noise, 0.74, "4 true and 4 noise predictors"));
  }

  const Scenario& mlr1 = r[0];
  const std::vector<double> b1{-0.55, -0.41, -0.55, -0.41};
  const std::vector<double> b2{-0.53, -0.39, -0.53, -0.39};
  const std::vector<double> b4{-0.54, -0.47, -0.51};
  r.push_back(clpo_scenario(1, mlr1, third, negate({-0.18, 1.55}), negate(b1), 0.74,
                            "balanced outcome"));
  r.push_back(clpo_scenario(2, mlr1, imb, negate({0.92, 2.80}), negate(b2), 0.74,
                            "imbalanced outcome"));
  r.push_back(clpo_scenario(3, mlr1, {0.70, 0.25, 0.05}, negate({1.73, 4.15}), negate(b2), 0.74,
                            "highly imbalanced outcome"));
  r.push_back(clpo_scenario(4, r[5], four, negate({-0.12, 1.22, 2.62}), negate(b4), 0.74, "K=4, Q=3"));
  r.push_back(clpo_scenario(5, r[6], four, negate({-0.05, 1.10, 2.35}), negate(b4), 0.66,
                            "K=4, Q=3, lower discrimination"));
  r.push_back(clpo_scenario(6, r[7], {0.45, 0.30, 0.20, 0.05}, {-0.18, -1.63, -3.58},
                            {0.54, 0.47, 0.50}, 0.66, "K=4, Q=3, rare top category"));
  r.push_back(clpo_scenario(7, r[8], imb, {-2.03, -3.94}, {1.39, 1.09, 1.22, 0.82}, 0.74,
                            "4 binary predictors"));
  r.push_back(clpo_scenario(8, r[9], four, {-1.52, -2.88, -4.30}, {1.75, 1.20, 1.46}, 0.74,
                            "3 binary predictors, K=4"));
  {
    Scenario base = mlr1;
    base.means.conservativeResize(8, 3);
    base.means.bottomRows(4).setZero();
    base.Q = 8;
    base.kinds.assign(8, C);
    auto beta = negate(b1);
    beta.resize(8, 0.0);
    r.push_back(clpo_scenario(9, base, third, negate({-0.18, 1.55}), beta, 0.74,
                              "4 true and 4 noise predictors"));
  }
  return r;
}

std::string normalize_id(std::string_view id) {
  std::string s;
  for (char c : id)
    if (std::isalnum(static_cast<unsigned char>(c))) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const std::vector<Scenario>& builtin_scenarios() {
  static const std::vector<Scenario> registry = make_registry();
  return registry;
}

const Scenario& find_scenario(std::string_view id) {
  const std::string key = normalize_id(id);
  for (const auto& s : builtin_scenarios())
    if (normalize_id(s.id) == key) return s;
  throw DataError("unknown scenario '" + std::string(id) + "'");
}

const Scenario& find_scenario(TruthForm form, int number) {
  for (const auto& s : builtin_scenarios())
    if (s.form == form && s.number == number) return s;
  throw DataError("unknown scenario number " + std::to_string(number));
}

MlrTruth mlr_truth(const Scenario& s) {
  if (s.form != TruthForm::mlr) throw DataError(s.id + " is not an MLR-form scenario");
  MlrTruth t;
  t.alpha.resize(s.K - 1);
  t.B.resize(s.Q, s.K - 1);
  for (int k = 1; k < s.K; ++k) {
    double a = std::log(s.priors(k) / s.priors(0));
    for (int q = 0; q < s.Q; ++q) {
      const double mk = s.means(q, k), m1 = s.means(q, 0);
      if (s.kinds[static_cast<size_t>(q)] == PredictorKind::continuous) {
        t.B(q, k - 1) = mk - m1;
        a -= 0.5 * (mk * mk - m1 * m1);
      } else {
        t.B(q, k - 1) = link::logit(mk) - link::logit(m1);
        a += std::log1p(-mk) - std::log1p(-m1);
      }
    }
    t.alpha(k - 1) = a;
  }
  return t;
}

ProbMatrix true_risks(const Scenario& s, const Eigen::MatrixXd& X) {
  if (X.cols() != s.Q)
    throw DataError("predictor matrix has " + std::to_string(X.cols()) + " columns, scenario " +
                    s.id + " has " + std::to_string(s.Q));
  Eigen::MatrixXd eta;
  Link link;
  if (s.form == TruthForm::mlr) {
    const MlrTruth t = mlr_truth(s);
    eta = X * t.B;
    eta.rowwise() += t.alpha.transpose();
    link = Link::multinomial;
  } else {
    eta = (X * s.beta).replicate(1, s.K - 1);
    eta.rowwise() += s.alpha.transpose();
    link = Link::cumulative;
  }
  const Eigen::MatrixXd et = eta.transpose();
  Eigen::MatrixXd pt(s.K, X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    link::probabilities(link, et.col(i).data(), s.K, pt.col(i).data());
  return make_probs(pt.transpose());
}

SimulatedData generate(const Scenario& s, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw DataError("sample size must be positive");
  CounterRng rng(seed);
  SimulatedData out;
  out.scenario_id = s.id;
  out.seed = seed;
  out.generator = std::string(CounterRng::id);
  Dataset& d = out.data;
  d.K = s.K;
  d.predictors.resize(n, s.Q);
  d.outcomes.resize(n);
  for (int q = 0; q < s.Q; ++q) d.column_names.push_back("x" + std::to_string(q + 1));

  Eigen::VectorXd cum(s.K);
  std::partial_sum(s.priors.data(), s.priors.data() + s.K, cum.data());
  cum /= cum(s.K - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = rng.categorical(cum);
    for (int q = 0; q < s.Q; ++q) {
      const double mu = s.means(q, k);
      d.predictors(i, q) = s.kinds[static_cast<size_t>(q)] == PredictorKind::continuous
                               ? mu + rng.normal()
                               : (rng.bernoulli(mu) ? 1.0 : 0.0);
    }
    d.outcomes(i) = k + 1;
  }
  out.truth = true_risks(s, d.predictors);
  if (s.form == TruthForm::clpo) {
    Eigen::VectorXd row_cum(s.K);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0;
      for (int k = 0; k < s.K; ++k) row_cum(k) = (acc += out.truth.values(i, k));
      row_cum(s.K - 1) = 1.0;
      d.outcomes(i) = rng.categorical(row_cum) + 1;
    }
  }
  return out;
}

}  // namespace ordcal
