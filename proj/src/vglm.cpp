#include "ordcal/vglm.hpp"

#include <limits>

namespace ordcal {

VglmProblem::VglmProblem(Link link, int K, const Eigen::MatrixXd& Z, const Eigen::VectorXi& y,
                         const Eigen::MatrixXd* offset)
    : link_(link), K_(K), Z_(Z), y_(y), offset_(offset) {}

Eigen::MatrixXd VglmProblem::eta(const Eigen::MatrixXd& C) const {
  Eigen::MatrixXd et = C * Z_.transpose();
  if (offset_) et += offset_->transpose();
  return et;
}

double VglmProblem::nll(const Eigen::MatrixXd& C, bool* valid) const {
  const Eigen::MatrixXd et = eta(C);
  std::vector<double> p(K_);
  double total = 0;
  bool ok = true;
  for (Eigen::Index i = 0; i < n(); ++i) {
    link::probabilities(link_, et.col(i).data(), K_, p.data());
    const double py = p[y_(i)];
    if (!(py > 0)) {
      ok = false;
      break;
    }
    total -= std::log(py);
  }
  if (valid) *valid = ok;
  return ok ? total : std::numeric_limits<double>::infinity();
}

VglmProblem::Evaluation VglmProblem::evaluate(const Eigen::MatrixXd& C, bool with_info) const {
  const int m = K_ - 1;
  const Eigen::MatrixXd et = eta(C);
  const int npairs = m * (m + 1) / 2;
  Eigen::MatrixXd U(n(), m);
  Eigen::MatrixXd W;
  if (with_info) W.resize(n(), npairs);
  std::vector<double> p(K_), g(K_ * m);

  Evaluation ev;
  for (Eigen::Index i = 0; i < n(); ++i) {
    link::derivatives(link_, et.col(i).data(), K_, p.data(), g.data());
    const int yi = y_(i);
    if (!(p[yi] > 0) && ev.valid) {
      ev.valid = false;
      ev.first_invalid = i;
    }
    ev.nll -= std::log(p[yi]);
    for (int j = 0; j < m; ++j) U(i, j) = g[yi * m + j];
    if (!with_info) continue;
    int k = 0;
    for (int j = 0; j < m; ++j)
      for (int l = j; l < m; ++l, ++k) {
        double w = 0;
        for (int c = 0; c < K_; ++c)
          if (p[c] > 0) w += p[c] * g[c * m + j] * g[c * m + l];
        W(i, k) = w;
      }
  }
  if (!ev.valid) ev.nll = std::numeric_limits<double>::infinity();
  ev.gradient = -U.transpose() * Z_;
  if (with_info) {
    const Eigen::Index T = this->T();
    ev.info.resize(m * T, m * T);
    int k = 0;
    for (int j = 0; j < m; ++j)
      for (int l = j; l < m; ++l, ++k) {
        const Eigen::MatrixXd B =
            Z_.transpose() * (Z_.array().colwise() * W.col(k).array()).matrix();
        for (Eigen::Index t = 0; t < T; ++t)
          for (Eigen::Index s = 0; s < T; ++s) {
            ev.info(t * m + j, s * m + l) = B(t, s);
            ev.info(s * m + l, t * m + j) = B(t, s);
          }
      }
  }
  return ev;
}

CoefMap linear_map(Eigen::Index rows, Eigen::Index cols, Eigen::MatrixXd J) {
  CoefMap map;
  map.rows = rows;
  map.cols = cols;
  map.size = J.cols();
  map.coef = [rows, cols, J](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd v = J * theta;
    return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
  };
  map.jacobian = [J](const Eigen::VectorXd&) { return J; };
  return map;
}

CoefMap constrained_map(const std::vector<Eigen::MatrixXd>& H) {
  const Eigen::Index m = H.front().rows();
  const Eigen::Index T = static_cast<Eigen::Index>(H.size());
  Eigen::Index p = 0;
  for (const auto& h : H) p += h.cols();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m * T, p);
  Eigen::Index offset = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    J.block(t * m, offset, m, H[t].cols()) = H[t];
    offset += H[t].cols();
  }
  return linear_map(m, T, std::move(J));
}

CoefMap restrict_map(const CoefMap& full, const Eigen::VectorXd& base, std::vector<int> free) {
  CoefMap map;
  map.rows = full.rows;
  map.cols = full.cols;
  map.size = static_cast<Eigen::Index>(free.size());
  auto embed = [base, free](const Eigen::VectorXd& sub) {
    Eigen::VectorXd theta = base;
    for (size_t i = 0; i < free.size(); ++i) theta(free[i]) = sub(static_cast<Eigen::Index>(i));
    return theta;
  };
  map.coef = [full, embed](const Eigen::VectorXd& sub) { return full.coef(embed(sub)); };
  map.jacobian = [full, embed, free](const Eigen::VectorXd& sub) {
    const Eigen::MatrixXd J = full.jacobian(embed(sub));
    Eigen::MatrixXd out(J.rows(), static_cast<Eigen::Index>(free.size()));
    for (size_t i = 0; i < free.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = J.col(free[i]);
    return out;
  };
  if (full.curvature)
    map.curvature = [full, embed, free](const Eigen::VectorXd& sub, const Eigen::MatrixXd& G) {
      const Eigen::MatrixXd S = full.curvature(embed(sub), G);
      const auto f = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd out(f, f);
      for (Eigen::Index a = 0; a < f; ++a)
        for (Eigen::Index b = 0; b < f; ++b) out(a, b) = S(free[a], free[b]);
      return out;
    };
  return map;
}

namespace {

Eigen::VectorXd theta_gradient(const Eigen::MatrixXd& J, const Eigen::MatrixXd& G) {
  return J.transpose() * Eigen::Map<const Eigen::VectorXd>(G.data(), G.size());
}

bool solve_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& grad, Eigen::VectorXd& delta) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) {
    delta = -llt.solve(grad);
    if (delta.allFinite()) return true;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    delta = -ldlt.solve(grad);
    if (delta.allFinite() && delta.dot(grad) < 0) return true;
  }
  return false;
}

}  // namespace

NewtonResult newton_fit(const VglmProblem& problem, const CoefMap& map, Eigen::VectorXd theta,
                        const NewtonControl& control) {
  NewtonResult r;
  auto ev = problem.evaluate(map.coef(theta), true);
  if (!ev.valid || !std::isfinite(ev.nll)) {
    r.theta = theta;
    r.valid = false;
    r.nll = ev.nll;
    r.message = "invalid starting values";
    return r;
  }
  r.trace.push_back(-ev.nll);

  Eigen::MatrixXd J = map.jacobian(theta);
  Eigen::VectorXd grad = theta_gradient(J, ev.gradient);
  Eigen::MatrixXd info = J.transpose() * ev.info * J;

  for (int it = 1; it <= control.max_iterations; ++it) {
    r.iterations = it;
    Eigen::VectorXd delta;
    bool solved = false;
    if (map.curvature) solved = solve_step(info + map.curvature(theta, ev.gradient), grad, delta);
    if (!solved) solved = solve_step(info, grad, delta);
    if (!solved) delta = -grad / std::max(1.0, grad.norm());

    double scale = 1.0;
    bool accepted = false;
    VglmProblem::Evaluation next;
    Eigen::VectorXd candidate;
    for (int h = 0; h <= control.max_halvings; ++h, scale *= 0.5) {
      candidate = theta + scale * delta;
      if (h == 0) {
        next = problem.evaluate(map.coef(candidate), true);
        if (next.valid && next.nll <= ev.nll) {
          accepted = true;
          break;
        }
      } else {
        bool ok = false;
        const double f = problem.nll(map.coef(candidate), &ok);
        if (ok && f <= ev.nll) {
          next = problem.evaluate(map.coef(candidate), true);
          accepted = next.valid;
          if (accepted) break;
        }
      }
    }

    if (!accepted) {
      const double decrement = -0.5 * grad.dot(delta);
      r.converged = solved && decrement <= 10 * control.tolerance * (std::abs(ev.nll) + 0.1);
      if (!r.converged) r.message = "step halving failed to decrease the objective";
      break;
    }

    const double rel = relative_change(ev.nll, next.nll);
    theta = candidate;
    ev = std::move(next);
    r.trace.push_back(-ev.nll);
    J = map.jacobian(theta);
    grad = theta_gradient(J, ev.gradient);
    info = J.transpose() * ev.info * J;
    if (rel < control.tolerance) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged && r.message.empty()) r.message = "iteration limit reached";

  r.theta = theta;
  r.nll = ev.nll;
  r.gradient_norm = grad.norm();
  r.info = info;
  return r;
}

}  // namespace ordcal
