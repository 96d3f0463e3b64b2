#pragma once

#include "ordcal/model.hpp"
#include "ordcal/simulation.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace testing {

inline ordcal::SimulatedData sample(const char* id, Eigen::Index n, std::uint64_t seed) {
  return ordcal::generate(ordcal::find_scenario(id), n, seed);
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Binary log-likelihood of y (0/1) under logit(p) = a + b * x.
inline double logistic_ll(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double a, double b) {
  double ll = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double eta = a + b * x(i);
    ll += y(i) * eta - std::log1p(std::exp(eta));
  }
  return ll;
}

// Golden-section maximizer on [lo, hi].
template <typename F>
double golden_max(F f, double lo, double hi, int iterations = 200) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc > fd) {
      hi = d; d = c; fd = fc;
      c = hi - g * (hi - lo); fc = f(c);
    } else {
      lo = c; c = d; fc = fd;
      d = lo + g * (hi - lo); fd = f(d);
    }
  }
  return (lo + hi) / 2;
}

// A parameter point near the null model: null intercepts plus noise, small slopes.
inline Eigen::VectorXd random_point(const ordcal::Dataset& data, const ordcal::ModelSpec& spec,
                                    std::mt19937_64& rng) {
  using namespace ordcal;
  const int Q = static_cast<int>(data.Q()), K = data.K;
  std::normal_distribution<double> noise(0, 0.3);
  FittedModel m;
  m.spec = spec;
  m.Q = Q;
  m.K = K;
  m.intercepts = null_intercepts(model_link(spec), category_counts(data.outcomes, K));
  // cumulative intercepts keep their order so every row has valid probabilities
  for (int j = 0; j < K - 1; ++j) m.intercepts(j) += 0.1 * noise(rng);
  const bool one_column = spec.proportional || spec.family == Family::stereotype;
  m.coefficients = Eigen::MatrixXd::Zero(Q, one_column ? 1 : K - 1);
  for (Eigen::Index q = 0; q < m.coefficients.rows(); ++q)
    for (Eigen::Index j = 0; j < m.coefficients.cols(); ++j)
      m.coefficients(q, j) = spec.family == Family::cumulative && !spec.proportional
                                 ? 0.05 * noise(rng)
                                 : noise(rng);
  if (spec.family == Family::stereotype) {
    m.scaling.resize(K - 1);
    for (int j = 0; j < K - 1; ++j) m.scaling(j) = j == 0 ? 1.0 : (j + 1) + noise(rng);
  }
  return pack_parameters(m);
}

}  // namespace testing
