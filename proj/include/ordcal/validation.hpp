#pragma once

#include "ordcal/calibration.hpp"
#include "ordcal/family.hpp"
#include "ordcal/model.hpp"
#include "ordcal/simulation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ordcal {

// All performance measures of one model on one evaluation dataset. Intercept
// and slope vectors are indexed by target: categories 1..K, dichotomies >=2..>=K,
// linear predictors 1..K-1. Unavailable values are NaN.
struct Evaluation {
  Eigen::VectorXd category_intercept, category_slope;
  Eigen::VectorXd dichotomy_intercept, dichotomy_slope;
  Eigen::VectorXd lp_intercept, lp_slope;
  double eci = std::nan("");  // rescaled
  double rmspe = std::nan("");
  double orc = std::nan("");
  std::vector<std::string> warnings;
};

struct EvaluationOptions {
  bool eci = true;
  bool model_specific = true;
  RecalSetup setup = RecalSetup::mlr_reference;
};

// Evaluates `model` on `data`; `truth` enables rMSPE.
Evaluation evaluate(const FittedModel& model, const Dataset& data, const ProbMatrix* truth,
                    const EvaluationOptions& options = {});

struct PerformanceRow {
  std::string scenario_id;
  ModelSpec spec;
  int K = 0;
  Eigen::Index n_dev = 0;
  Eigen::Index n_eval = 0;
  int replicates = 0;       // replicates that entered the means
  int failures = 0;         // fits excluded as failed
  int redraws = 0;          // datasets redrawn for a missing category
  int excluded_slopes = 0;  // slopes with |b| > 20 left out of the means
  Evaluation mean;          // apparent values, or means over replicates
  std::vector<Evaluation> per_replicate;  // one per successful replicate, in replicate order
  std::vector<std::string> failure_log;   // "replicate r: message"
  bool converged = true;                  // large sample only
};

struct LargeSampleOptions {
  Eigen::Index n = 200000;
  std::uint64_t seed = 1;
  FitOptions fit;
  EvaluationOptions evaluation;
};

std::vector<PerformanceRow> large_sample_study(const std::vector<Scenario>& scenarios,
                                               const std::vector<ModelSpec>& families,
                                               const LargeSampleOptions& options = {});

struct SmallSampleOptions {
  Eigen::Index n_dev = 100;
  int reps = 200;
  Eigen::Index n_eval = 200000;
  std::uint64_t seed = 1;
  // Evaluation set seed; by default derived from `seed` and distinct from every replicate.
  std::optional<std::uint64_t> eval_seed;
  unsigned threads = 0;  // 0 = hardware concurrency
  double slope_limit = 20;
  FitOptions fit;
  EvaluationOptions evaluation{false, true, RecalSetup::mlr_reference};
};

std::vector<PerformanceRow> small_sample_study(const Scenario& scenario,
                                               const std::vector<ModelSpec>& families,
                                               const SmallSampleOptions& options = {});

struct BootstrapMetric {
  std::string name;
  double apparent = 0;
  double optimism = 0;
  double corrected = 0;
  int resamples = 0;  // resamples that produced both values
};

struct BootstrapResult {
  ModelSpec spec;
  int B = 0;
  int redraws = 0;
  int failures = 0;
  bool exhausted = false;  // redraw cap of 10 * B reached
  std::vector<BootstrapMetric> metrics;
  std::vector<std::string> warnings;
};

struct BootstrapOptions {
  int B = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  FitOptions fit;
};

// Optimism-corrected calibration (all three layers) and ORC.
BootstrapResult bootstrap_correct(const Dataset& data, const ModelSpec& spec,
                                  const BootstrapOptions& options = {});

// Column names of the performance summary, shared by CSV writers.
std::vector<std::string> performance_columns(int K);
std::vector<std::string> performance_values(const PerformanceRow& row);

}  // namespace ordcal
