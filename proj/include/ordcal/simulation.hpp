#pragma once

#include "ordcal/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ordcal {

enum class TruthForm { mlr, clpo };
enum class PredictorKind { continuous, binary };

// A generative truth. Predictors always come from a class mixture: class k with
// weight priors(k), then X_q ~ Normal(means(q,k), 1) or Bernoulli(means(q,k)).
// MLR form uses the class as the outcome. CLPO form draws the outcome from
// logit P(Y >= k+1 | x) = alpha(k) + beta'x. Coefficients quoted in the
// P(Y <= k) convention enter with their signs flipped.
struct Scenario {
  std::string id;
  TruthForm form = TruthForm::mlr;
  int number = 0;
  int Q = 0;
  int K = 0;
  std::vector<PredictorKind> kinds;
  Eigen::VectorXd priors;  // K
  Eigen::MatrixXd means;   // Q x K
  Eigen::VectorXd alpha;   // CLPO form, K-1
  Eigen::VectorXd beta;    // CLPO form, Q
  double nominal_orc = 0;
  std::string description;
};

struct SimulatedData {
  Dataset data;
  ProbMatrix truth;
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::string generator;
};

const std::vector<Scenario>& builtin_scenarios();

// Accepts "MLR-3", "mlr3", "clpo-1" and similar spellings.
const Scenario& find_scenario(std::string_view id);
const Scenario& find_scenario(TruthForm form, int number);

SimulatedData generate(const Scenario& scenario, Eigen::Index n, std::uint64_t seed);

ProbMatrix true_risks(const Scenario& scenario, const Eigen::MatrixXd& X);

// Exact multinomial-logit form of an MLR-form truth, reference category 1.
struct MlrTruth {
  Eigen::VectorXd alpha;  // K-1
  Eigen::MatrixXd B;      // Q x (K-1)
};

MlrTruth mlr_truth(const Scenario& scenario);

}  // namespace ordcal
