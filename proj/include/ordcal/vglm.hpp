#pragma once

#include "ordcal/links.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ordcal {

// Vector GLM with linear predictor eta_i = offset_i + C z_i, where C is m x T
// (m = K-1 equations, T covariate columns including any intercept column).
class VglmProblem {
 public:
  // y holds 0-based categories. Z, y and offset must outlive the problem.
  VglmProblem(Link link, int K, const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
              const Eigen::MatrixXd* offset = nullptr);

  struct Evaluation {
    double nll = 0;
    bool valid = true;         // false if some observed category got p <= 0
    Eigen::Index first_invalid = -1;
    Eigen::MatrixXd gradient;  // d nll / d C, m x T
    Eigen::MatrixXd info;      // expected information for vec(C), index t*m + j
  };

  Link link() const { return link_; }
  int K() const { return K_; }
  int m() const { return K_ - 1; }
  Eigen::Index n() const { return Z_.rows(); }
  Eigen::Index T() const { return Z_.cols(); }
  const Eigen::MatrixXd& Z() const { return Z_; }

  Eigen::MatrixXd eta(const Eigen::MatrixXd& C) const;
  double nll(const Eigen::MatrixXd& C, bool* valid = nullptr) const;
  Evaluation evaluate(const Eigen::MatrixXd& C, bool with_info) const;

 private:
  Link link_;
  int K_;
  const Eigen::MatrixXd& Z_;
  const Eigen::VectorXi& y_;
  const Eigen::MatrixXd* offset_;
};

// Maps a free parameter vector theta to the coefficient matrix C.
struct CoefMap {
  Eigen::Index rows = 0, cols = 0, size = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> coef;
  // d vec(C) / d theta, (rows*cols) x size
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
  // Optional sum_c (d nll / d C_c) d^2 C_c / d theta^2, for non-linear maps.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::MatrixXd&)> curvature;
};

// Linear map from term-wise constraint matrices: column t of C is H[t] * theta_t,
// theta ordered term by term.
CoefMap constrained_map(const std::vector<Eigen::MatrixXd>& H);

// Fixed linear map vec(C) = J theta.
CoefMap linear_map(Eigen::Index rows, Eigen::Index cols, Eigen::MatrixXd J);

// Restricts a map to the coordinates in `free`, holding the rest at `base`.
CoefMap restrict_map(const CoefMap& full, const Eigen::VectorXd& base, std::vector<int> free);

struct NewtonControl {
  double tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 30;
};

struct NewtonResult {
  Eigen::VectorXd theta;
  double nll = 0;
  int iterations = 0;
  bool converged = false;
  bool valid = true;
  double gradient_norm = 0;
  std::vector<double> trace;  // log-likelihood after each accepted iterate
  Eigen::MatrixXd info;       // information for theta at the solution
  std::string message;
};

// Fisher scoring with step halving. The log-likelihood never decreases.
NewtonResult newton_fit(const VglmProblem& problem, const CoefMap& map, Eigen::VectorXd theta,
                        const NewtonControl& control = {});

// Relative change used by every convergence test.
inline double relative_change(double before, double after) {
  return std::abs(before - after) / (std::abs(after) + 0.1);
}

}  // namespace ordcal
