#pragma once

#include "ordcal/model.hpp"
#include "ordcal/types.hpp"

#include <string>
#include <vector>

namespace ordcal {

constexpr double kProbClip = 1e-12;

enum class TargetKind { category, dichotomy, linear_predictor };

struct CalibrationTarget {
  TargetKind kind = TargetKind::category;
  int index = 1;  // category k, dichotomy >= k, or linear predictor j (1-based)

  std::string label() const;
};

struct WeakCalibration {
  CalibrationTarget target;
  double intercept = 0;
  double slope = 1;
  bool converged = true;
  std::string message;
};

// Binary logistic recalibration: slope from logit(y) = a + b x, intercept from
// logit(y) = a + x.
struct BinaryCalibration {
  double intercept = 0;
  double slope = 1;
  bool converged = true;
};
BinaryCalibration binary_calibration(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

WeakCalibration weak_calibration(const ProbMatrix& probs, const Eigen::VectorXi& y,
                                 CalibrationTarget target);

// Categories 1..K followed by dichotomies >=2..>=K.
std::vector<WeakCalibration> weak_calibration_all(const ProbMatrix& probs, const Eigen::VectorXi& y);

// One entry per linear predictor, computed in the model's own family.
std::vector<WeakCalibration> model_specific_calibration(const FittedModel& model, const Dataset& data);

// Same, from an n x (K-1) linear predictor matrix.
std::vector<WeakCalibration> model_specific_calibration(const ModelSpec& spec,
                                                        const Eigen::MatrixXd& lp,
                                                        const Eigen::VectorXi& y, int K);

enum class RecalSetup {
  mlr_reference,
  cr_reference,
  mlr_dichotomy,
  cr_dichotomy,
  mlr_category,
  cr_category
};

std::string setup_name(RecalSetup setup);
RecalSetup parse_setup(const std::string& name);
const std::vector<RecalSetup>& all_setups();

struct FlexibleRecalibration {
  RecalSetup setup = RecalSetup::mlr_reference;
  int df = 4;
  std::vector<int> basis_columns;       // spline columns kept per transformed predictor
  Eigen::VectorXd coefficients;         // free parameters of the recalibration model
  Eigen::MatrixXd observed;             // n x K observed proportions
  double log_likelihood = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

FlexibleRecalibration flexible_recalibration(const ProbMatrix& probs, const Eigen::VectorXi& y,
                                             RecalSetup setup = RecalSetup::mlr_reference,
                                             int df = 4);

enum class EciVariant { original, rescaled };

double eci(const ProbMatrix& probs, const FlexibleRecalibration& recal, const Eigen::VectorXi& y,
           EciVariant variant);

enum class CurveMode { category, dichotomy };

struct CurveTarget {
  std::string label;
  Eigen::MatrixXd scatter;  // n x 2, (estimated, observed)
  Eigen::MatrixXd curve;    // grid x 2
};

struct CalibrationCurves {
  CurveMode mode = CurveMode::category;
  std::vector<CurveTarget> targets;
};

CalibrationCurves calibration_curve_data(const ProbMatrix& probs, const FlexibleRecalibration& recal,
                                         CurveMode mode);

// Local linear regression with tricube weights over the nearest span * n points.
Eigen::VectorXd local_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& at, double span = 0.75);

}  // namespace ordcal
