#pragma once

#include "ordcal/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ordcal {

// score_i = sum_k k * p_ik
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> expected_outcome_score(
    const Eigen::MatrixBase<Derived>& P) {
  using Scalar = typename Derived::Scalar;
  const auto K = P.cols();
  return P * Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::LinSpaced(K, Scalar(1), Scalar(K));
}

inline Eigen::VectorXd expected_outcome_score(const ProbMatrix& probs) {
  return expected_outcome_score(probs.values);
}

// Binary C statistic of `score` for label `hi` against label `lo`, ties count 1/2.
// Returns NaN if either label is absent.
double pairwise_c(const Eigen::VectorXd& score, const Eigen::VectorXi& y, int lo, int hi);

struct OrcResult {
  double value = 0.5;
  int pairs_used = 0;
  std::vector<std::string> warnings;
};

OrcResult orc_detail(const Eigen::VectorXd& score, const Eigen::VectorXi& y, int K);

inline double orc(const ProbMatrix& probs, const Eigen::VectorXi& y) {
  return orc_detail(expected_outcome_score(probs), y, static_cast<int>(probs.K())).value;
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmspe(const Eigen::MatrixBase<DerivedA>& estimated,
                                const Eigen::MatrixBase<DerivedB>& truth) {
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols())
    throw DataError("rmspe: dimension mismatch");
  using std::sqrt;
  return sqrt((estimated - truth).squaredNorm() / static_cast<typename DerivedA::Scalar>(estimated.size()));
}

inline double rmspe(const ProbMatrix& estimated, const ProbMatrix& truth) {
  return rmspe(estimated.values, truth.values);
}

}  // namespace ordcal
