#pragma once

#include "ordcal/family.hpp"
#include "ordcal/types.hpp"
#include "ordcal/vglm.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ordcal {

struct FitOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  int max_alternations = 200;  // stereotype only
  int max_halvings = 30;
};

struct FitDiagnostics {
  double gradient_norm = 0;
  std::vector<double> trace;  // log-likelihood per accepted iterate
  std::vector<std::string> warnings;
  std::string message;
  bool valid = true;  // false if some development row has a non-positive risk
};

struct FittedModel {
  ModelSpec spec;
  int Q = 0;
  int K = 0;
  std::vector<std::string> column_names;
  Eigen::VectorXd intercepts;    // K-1
  Eigen::MatrixXd coefficients;  // Q x (K-1), or Q x 1 for proportional and stereotype
  Eigen::VectorXd scaling;       // stereotype only, K-1 with scaling(0) == 1
  double log_likelihood = 0;
  int iterations = 0;
  bool converged = false;
  double tolerance = 1e-8;
  FitDiagnostics diagnostics;

  // Q x (K-1) coefficients of every equation.
  Eigen::MatrixXd effective_coefficients() const;
};

// Flat parameter layout: intercepts, then the free coefficient entries column
// by column, then scaling factors 3..K (stereotype). Proportional models store
// one column; a relaxed predictor adds its entries in columns 2..K-1.
Eigen::VectorXd pack_parameters(const FittedModel& model);
FittedModel unpack_parameters(const ModelSpec& spec, int Q, int K, const Eigen::VectorXd& params);

Link model_link(const ModelSpec& spec);

// Intercepts of the covariate-free model, from category counts.
Eigen::VectorXd null_intercepts(Link link, const Eigen::VectorXi& counts);

FittedModel fit(const Dataset& data, const ModelSpec& spec, const FitOptions& options = {});

Eigen::MatrixXd linear_predictors(const FittedModel& model, const Eigen::MatrixXd& X);

ProbMatrix predict_probs(const FittedModel& model, const Eigen::MatrixXd& X);

// Probabilities from an n x (K-1) linear predictor matrix.
ProbMatrix probs_from_eta(Link link, const Eigen::MatrixXd& eta);

struct ValidityReport {
  Eigen::Index count = 0;
  std::vector<Eigen::Index> rows;
};

ValidityReport cumulative_validity(const FittedModel& model, const Eigen::MatrixXd& X);

std::pair<double, Eigen::VectorXd> nll_and_gradient(const Eigen::VectorXd& params,
                                                    const Dataset& data, const ModelSpec& spec);

struct LrTestResult {
  int predictor = 0;
  std::string name;
  double statistic = 0;
  int df = 0;
  double p_value = 1;
  double loglik_proportional = 0;
  double loglik_relaxed = 0;
};

LrTestResult lr_test_proportionality(const Dataset& data, int q, const FitOptions& options = {});

}  // namespace ordcal
