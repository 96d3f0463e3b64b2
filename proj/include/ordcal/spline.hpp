#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ordcal {

// B-spline regression basis without the intercept column. Interior knots sit at
// quantiles of the training values, boundary knots at their range.
struct SplineBasis {
  int degree = 3;
  Eigen::VectorXd knots;  // boundary knots repeated degree+1 times
  std::vector<std::string> warnings;

  Eigen::Index columns() const { return knots.size() - degree - 2; }
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
};

// Cubic basis with df columns (df - 3 interior knots). Knots are dropped, and the
// degree lowered, when x has too few distinct values; constant x is rejected.
SplineBasis make_spline_basis(const Eigen::VectorXd& x, int df = 4);

// Type-7 sample quantile of sorted values.
double sorted_quantile(const std::vector<double>& sorted, double p);

}  // namespace ordcal
