#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ordcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid family/proportionality combination.
struct SpecificationError : Error {
  using Error::Error;
};

// Input data violates a contract (labels, shapes, non-finite values).
struct DataError : Error {
  using Error::Error;
};

// Fitting or evaluation broke down numerically.
struct NumericalError : Error {
  using Error::Error;
};

template <typename Scalar>
struct BasicDataset {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix predictors;            // n x Q
  Eigen::VectorXi outcomes;     // labels 1..K
  int K = 0;
  std::vector<std::string> column_names;

  Eigen::Index n() const { return predictors.rows(); }
  Eigen::Index Q() const { return predictors.cols(); }
};

template <typename Scalar>
struct BasicProbMatrix {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix values;                       // n x K
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index K() const { return values.cols(); }
  bool all_valid() const { return valid.size() == 0 || valid.all(); }
};

using Dataset = BasicDataset<double>;
using ProbMatrix = BasicProbMatrix<double>;

inline ProbMatrix make_probs(Eigen::MatrixXd values) {
  ProbMatrix p;
  p.valid = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(values.rows(), true);
  p.values = std::move(values);
  return p;
}

// Subset of rows, keeping labels and names.
Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& rows);

// Throws DataError if labels leave 1..K or predictors are non-finite.
void check_dataset(const Dataset& d);

// Category counts, index k-1 for label k.
Eigen::VectorXi category_counts(const Eigen::VectorXi& y, int K);

}  // namespace ordcal
