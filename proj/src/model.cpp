#include "ordcal/model.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ordcal {

namespace {

Eigen::MatrixXd design(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z(X.rows(), X.cols() + 1);
  Z.col(0).setOnes();
  Z.rightCols(X.cols()) = X;
  return Z;
}

std::vector<int> sorted_relaxed(const ModelSpec& spec) {
  auto r = spec.relaxed;
  std::sort(r.begin(), r.end());
  return r;
}

// d vec(C) / d params for the linear families, C = [alpha, B']
Eigen::MatrixXd linear_jacobian(const ModelSpec& spec, int Q, int K) {
  const int m = K - 1;
  const int p = param_count(spec, Q, K);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m * (Q + 1), p);
  for (int j = 0; j < m; ++j) J(j, j) = 1;
  if (!spec.proportional) {
    for (int j = 0; j < m; ++j)
      for (int q = 0; q < Q; ++q) J((q + 1) * m + j, m + j * Q + q) = 1;
    return J;
  }
  const auto relaxed = sorted_relaxed(spec);
  for (int q = 0; q < Q; ++q) {
    const bool free_row = std::binary_search(relaxed.begin(), relaxed.end(), q);
    J((q + 1) * m, m + q) = 1;
    for (int j = 1; j < m; ++j) {
      if (free_row) {
        const auto r = std::lower_bound(relaxed.begin(), relaxed.end(), q) - relaxed.begin();
        J((q + 1) * m + j, m + Q + (j - 1) * static_cast<int>(relaxed.size()) + r) = 1;
      } else {
        J((q + 1) * m + j, m + q) = 1;
      }
    }
  }
  return J;
}

// Stereotype: C(j, 0) = alpha_j, C(j, q+1) = phi_j beta_q, phi_0 = 1.
CoefMap stereotype_map(int Q, int K) {
  const int m = K - 1;
  CoefMap map;
  map.rows = m;
  map.cols = Q + 1;
  map.size = Q + 2 * K - 3;
  auto phi = [m, Q](const Eigen::VectorXd& th) {
    Eigen::VectorXd f(m);
    f(0) = 1;
    for (int j = 1; j < m; ++j) f(j) = th(m + Q + j - 1);
    return f;
  };
  map.coef = [m, Q, phi](const Eigen::VectorXd& th) {
    Eigen::MatrixXd C(m, Q + 1);
    C.col(0) = th.head(m);
    C.rightCols(Q) = phi(th) * th.segment(m, Q).transpose();
    return C;
  };
  map.jacobian = [m, Q, phi](const Eigen::VectorXd& th) {
    const Eigen::VectorXd f = phi(th);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m * (Q + 1), Q + 2 * m - 1);
    for (int j = 0; j < m; ++j) J(j, j) = 1;
    for (int q = 0; q < Q; ++q)
      for (int j = 0; j < m; ++j) {
        J((q + 1) * m + j, m + q) = f(j);
        if (j > 0) J((q + 1) * m + j, m + Q + j - 1) = th(m + q);
      }
    return J;
  };
  map.curvature = [m, Q](const Eigen::VectorXd&, const Eigen::MatrixXd& G) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(Q + 2 * m - 1, Q + 2 * m - 1);
    for (int q = 0; q < Q; ++q)
      for (int j = 1; j < m; ++j) {
        S(m + q, m + Q + j - 1) = G(j, q + 1);
        S(m + Q + j - 1, m + q) = G(j, q + 1);
      }
    return S;
  };
  return map;
}

CoefMap parameter_map(const ModelSpec& spec, int Q, int K) {
  if (spec.family == Family::stereotype) return stereotype_map(Q, K);
  return linear_map(K - 1, Q + 1, linear_jacobian(spec, Q, K));
}

void check_fit_inputs(const Dataset& data, const ModelSpec& spec) {
  validate(spec);
  check_dataset(data);
  const Eigen::VectorXi counts = category_counts(data.outcomes, data.K);
  for (int k = 0; k < data.K; ++k)
    if (counts(k) == 0)
      throw DataError("outcome category " + std::to_string(k + 1) + " is empty");
  const int p = param_count(spec, static_cast<int>(data.Q()), data.K);
  if (data.n() <= p)
    throw DataError("need more rows (" + std::to_string(data.n()) + ") than parameters (" +
                    std::to_string(p) + ")");
}

void attach_result(FittedModel& model, const NewtonResult& r) {
  model.diagnostics.gradient_norm = r.gradient_norm;
  model.diagnostics.message = r.message;
  model.log_likelihood = -r.nll;
  model.converged = r.converged && r.valid;
}

void finish(FittedModel& model, const Eigen::MatrixXd& X) {
  // Separated data can also stop the relative-change test once the
  // log-likelihood flattens near 0, so this is checked for converged fits too.
  {
    const Eigen::MatrixXd L = linear_predictors(model, X);
    if (L.size() > 0 && L.cwiseAbs().maxCoeff() > 30)
      model.diagnostics.warnings.push_back(
          "possible complete or quasi-complete separation: |linear predictor| > 30");
  }
  if (model.spec.family == Family::cumulative) {
    if (!model.spec.proportional || !model.spec.relaxed.empty()) {
      const auto rep = cumulative_validity(model, X);
      if (rep.count > 0) {
        model.diagnostics.valid = false;
        model.diagnostics.warnings.push_back(std::to_string(rep.count) +
                                             " development rows have crossing cumulative risks");
      }
    }
    for (int j = 0; j + 1 < model.intercepts.size(); ++j)
      if (model.intercepts(j) < model.intercepts(j + 1)) {
        model.diagnostics.warnings.push_back("cumulative intercepts are not ordered");
        break;
      }
  }
}

FittedModel fit_linear(const Dataset& data, const ModelSpec& spec, const FitOptions& options,
                       const Eigen::VectorXd* start) {
  const int Q = static_cast<int>(data.Q()), K = data.K;
  const Eigen::MatrixXd Z = design(data.predictors);
  const Eigen::VectorXi y = data.outcomes.array() - 1;
  const Link link = model_link(spec);
  VglmProblem problem(link, K, Z, y);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(spec, Q, K));
  if (start) {
    theta = *start;
  } else {
    theta.head(K - 1) = null_intercepts(link, category_counts(data.outcomes, K));
  }
  NewtonControl control{options.tolerance, options.max_iterations, options.max_halvings};
  const NewtonResult r = newton_fit(problem, parameter_map(spec, Q, K), theta, control);

  FittedModel model = unpack_parameters(spec, Q, K, r.theta);
  model.column_names = data.column_names;
  model.tolerance = options.tolerance;
  model.iterations = r.iterations;
  model.diagnostics.trace = r.trace;
  attach_result(model, r);
  return model;
}

std::vector<int> index_range(int from, int to) {
  std::vector<int> v(static_cast<size_t>(std::max(0, to - from)));
  std::iota(v.begin(), v.end(), from);
  return v;
}

FittedModel fit_stereotype(const Dataset& data, const FitOptions& options) {
  const int Q = static_cast<int>(data.Q()), K = data.K, m = K - 1;
  const FittedModel warm = fit_linear(data, ac_po(), options, nullptr);

  Eigen::VectorXd theta(Q + 2 * K - 3);
  double cum = 0;
  for (int j = 0; j < m; ++j) theta(j) = (cum += warm.intercepts(j));
  theta.segment(m, Q) = warm.coefficients.col(0);
  for (int j = 1; j < m; ++j) theta(m + Q + j - 1) = j + 1;

  const Eigen::MatrixXd Z = design(data.predictors);
  const Eigen::VectorXi y = data.outcomes.array() - 1;
  VglmProblem problem(Link::multinomial, K, Z, y);
  const CoefMap full = stereotype_map(Q, K);

  std::vector<int> block_beta = index_range(0, m + Q);
  std::vector<int> block_phi = index_range(0, m);
  for (int j = 1; j < m; ++j) block_phi.push_back(m + Q + j - 1);

  NewtonControl one_step{options.tolerance, 1, options.max_halvings};
  NewtonControl polish{options.tolerance, options.max_iterations, options.max_halvings};

  FittedModel model;
  std::vector<double> trace{warm.log_likelihood};
  double nll = -warm.log_likelihood;
  bool converged = false;
  bool polished = false;
  int iterations = 0;
  NewtonResult last;
  for (int a = 1; a <= options.max_alternations && !converged; ++a) {
    ++iterations;
    const double before = nll;
    for (const auto* block : {&block_beta, &block_phi}) {
      Eigen::VectorXd sub(static_cast<Eigen::Index>(block->size()));
      for (size_t i = 0; i < block->size(); ++i) sub(static_cast<Eigen::Index>(i)) = theta((*block)[i]);
      last = newton_fit(problem, restrict_map(full, theta, *block), sub, one_step);
      for (size_t i = 0; i < block->size(); ++i) theta((*block)[i]) = last.theta(static_cast<Eigen::Index>(i));
      nll = last.nll;
    }
    trace.push_back(-nll);
    const double rel = relative_change(before, nll);
    if (rel < options.tolerance) converged = true;
    if (!converged && !polished && rel < 1e-5) {
      // joint Newton from inside the basin
      polished = true;
      last = newton_fit(problem, full, theta, polish);
      iterations += last.iterations;
      if (last.valid && last.nll <= nll) {
        theta = last.theta;
        nll = last.nll;
        for (size_t i = 1; i < last.trace.size(); ++i) trace.push_back(last.trace[i]);
        converged = last.converged;
      }
    }
  }
  model = unpack_parameters(slm(), Q, K, theta);
  model.column_names = data.column_names;
  model.tolerance = options.tolerance;
  model.iterations = iterations;
  model.log_likelihood = -nll;
  model.converged = converged;
  model.diagnostics.trace = std::move(trace);
  {
    const auto ev = problem.evaluate(full.coef(theta), false);
    const Eigen::MatrixXd& G = ev.gradient;
    model.diagnostics.gradient_norm =
        (full.jacobian(theta).transpose() * Eigen::Map<const Eigen::VectorXd>(G.data(), G.size())).norm();
  }
  if (!converged) model.diagnostics.message = "alternation limit reached";
  return model;
}

}  // namespace

Link model_link(const ModelSpec& spec) {
  switch (spec.family) {
    case Family::multinomial:
    case Family::stereotype: return Link::multinomial;
    case Family::cumulative: return Link::cumulative;
    case Family::adjacent: return Link::adjacent;
    case Family::continuation: return Link::continuation;
  }
  return Link::multinomial;
}

// Null-model intercepts through the link.
Eigen::VectorXd null_intercepts(Link link, const Eigen::VectorXi& counts) {
  const int K = static_cast<int>(counts.size());
  const Eigen::VectorXd f = counts.cast<double>().cwiseMax(0.5);
  Eigen::VectorXd a(K - 1);
  for (int j = 0; j < K - 1; ++j) {
    const double above = f.tail(K - 1 - j).sum();
    switch (link) {
      case Link::multinomial: a(j) = std::log(f(j + 1) / f(0)); break;
      case Link::adjacent: a(j) = std::log(f(j + 1) / f(j)); break;
      case Link::continuation: a(j) = std::log(above / f(j)); break;
      case Link::cumulative: a(j) = std::log(above / f.head(j + 1).sum()); break;
    }
  }
  return a;
}

Eigen::MatrixXd FittedModel::effective_coefficients() const {
  const int m = K - 1;
  if (spec.family == Family::stereotype) return coefficients.col(0) * scaling.transpose();
  if (coefficients.cols() == m) return coefficients;
  return coefficients.col(0).replicate(1, m);
}

Eigen::VectorXd pack_parameters(const FittedModel& model) {
  const int Q = model.Q, K = model.K, m = K - 1;
  Eigen::VectorXd p(param_count(model.spec, Q, K));
  p.head(m) = model.intercepts;
  if (model.spec.family == Family::stereotype) {
    p.segment(m, Q) = model.coefficients.col(0);
    p.tail(m - 1) = model.scaling.tail(m - 1);
    return p;
  }
  if (!model.spec.proportional) {
    p.tail(Q * m) = Eigen::Map<const Eigen::VectorXd>(model.coefficients.data(), Q * m);
    return p;
  }
  const auto relaxed = sorted_relaxed(model.spec);
  const Eigen::MatrixXd B = model.effective_coefficients();
  p.segment(m, Q) = B.col(0);
  Eigen::Index at = m + Q;
  for (int j = 1; j < m; ++j)
    for (int q : relaxed) p(at++) = B(q, j);
  return p;
}

FittedModel unpack_parameters(const ModelSpec& spec, int Q, int K, const Eigen::VectorXd& params) {
  const int m = K - 1;
  if (params.size() != param_count(spec, Q, K))
    throw DataError("parameter vector has length " + std::to_string(params.size()) + ", expected " +
                    std::to_string(param_count(spec, Q, K)));
  FittedModel model;
  model.spec = spec;
  model.Q = Q;
  model.K = K;
  model.intercepts = params.head(m);
  if (spec.family == Family::stereotype) {
    model.coefficients = params.segment(m, Q);
    model.scaling.resize(m);
    model.scaling(0) = 1;
    model.scaling.tail(m - 1) = params.tail(m - 1);
  } else if (!spec.proportional) {
    model.coefficients = Eigen::Map<const Eigen::MatrixXd>(params.data() + m, Q, m);
  } else if (spec.relaxed.empty()) {
    model.coefficients = params.segment(m, Q);
  } else {
    const auto relaxed = sorted_relaxed(spec);
    model.coefficients = params.segment(m, Q).replicate(1, m);
    Eigen::Index at = m + Q;
    for (int j = 1; j < m; ++j)
      for (int q : relaxed) model.coefficients(q, j) = params(at++);
  }
  for (int q = 0; q < Q; ++q) model.column_names.push_back("x" + std::to_string(q + 1));
  return model;
}

FittedModel fit(const Dataset& data, const ModelSpec& spec, const FitOptions& options) {
  check_fit_inputs(data, spec);
  for (int q : spec.relaxed)
    if (q >= data.Q()) throw SpecificationError("relaxed predictor index out of range");
  FittedModel model;
  if (spec.family == Family::stereotype) {
    model = fit_stereotype(data, options);
  } else if (!spec.relaxed.empty()) {
    // start from the proportional solution
    ModelSpec po = spec;
    po.relaxed.clear();
    const FittedModel base = fit_linear(data, po, options, nullptr);
    FittedModel seed = base;
    seed.spec = spec;
    seed.coefficients = base.coefficients.col(0).replicate(1, data.K - 1);
    const Eigen::VectorXd start = pack_parameters(seed);
    model = fit_linear(data, spec, options, &start);
  } else {
    model = fit_linear(data, spec, options, nullptr);
  }
  if (model.column_names.size() != static_cast<size_t>(data.Q())) {
    model.column_names.clear();
    for (int q = 0; q < data.Q(); ++q) model.column_names.push_back("x" + std::to_string(q + 1));
  }
  finish(model, data.predictors);
  return model;
}

Eigen::MatrixXd linear_predictors(const FittedModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.Q)
    throw DataError("predictor matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                    std::to_string(model.Q));
  Eigen::MatrixXd L = X * model.effective_coefficients();
  L.rowwise() += model.intercepts.transpose();
  return L;
}

ProbMatrix probs_from_eta(Link link, const Eigen::MatrixXd& eta) {
  const Eigen::Index n = eta.rows();
  const int K = static_cast<int>(eta.cols()) + 1;
  const Eigen::MatrixXd et = eta.transpose();
  Eigen::MatrixXd pt(K, n);
  for (Eigen::Index i = 0; i < n; ++i) link::probabilities(link, et.col(i).data(), K, pt.col(i).data());
  ProbMatrix out;
  out.values = pt.transpose();
  out.valid = (out.values.array() >= 0).rowwise().all();
  return out;
}

ProbMatrix predict_probs(const FittedModel& model, const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw DataError("predictor matrix contains non-finite values");
  return probs_from_eta(model_link(model.spec), linear_predictors(model, X));
}

ValidityReport cumulative_validity(const FittedModel& model, const Eigen::MatrixXd& X) {
  ValidityReport rep;
  if (model.spec.family != Family::cumulative) return rep;
  if (model.spec.proportional && model.spec.relaxed.empty()) return rep;
  const Eigen::MatrixXd L = linear_predictors(model, X);
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    for (Eigen::Index j = 0; j + 1 < L.cols(); ++j)
      if (L(i, j) < L(i, j + 1)) {
        rep.rows.push_back(i);
        break;
      }
  rep.count = static_cast<Eigen::Index>(rep.rows.size());
  return rep;
}

std::pair<double, Eigen::VectorXd> nll_and_gradient(const Eigen::VectorXd& params,
                                                    const Dataset& data, const ModelSpec& spec) {
  validate(spec);
  check_dataset(data);
  const int Q = static_cast<int>(data.Q()), K = data.K;
  if (params.size() != param_count(spec, Q, K))
    throw DataError("parameter vector has length " + std::to_string(params.size()) + ", expected " +
                    std::to_string(param_count(spec, Q, K)));
  const Eigen::MatrixXd Z = design(data.predictors);
  const Eigen::VectorXi y = data.outcomes.array() - 1;
  VglmProblem problem(model_link(spec), K, Z, y);
  const CoefMap map = parameter_map(spec, Q, K);
  const auto ev = problem.evaluate(map.coef(params), false);
  if (!ev.valid || !std::isfinite(ev.nll))
    throw NumericalError("non-finite log-likelihood at row " + std::to_string(ev.first_invalid + 1));
  const Eigen::VectorXd grad =
      map.jacobian(params).transpose() *
      Eigen::Map<const Eigen::VectorXd>(ev.gradient.data(), ev.gradient.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad(i)))
      throw NumericalError("non-finite gradient at parameter " + std::to_string(i));
  return {ev.nll, grad};
}

LrTestResult lr_test_proportionality(const Dataset& data, int q, const FitOptions& options) {
  if (data.K < 3) throw DataError("proportionality test needs K >= 3");
  if (q < 0 || q >= data.Q()) throw DataError("predictor index out of range");
  LrTestResult r;
  r.predictor = q;
  r.name = q < static_cast<int>(data.column_names.size()) ? data.column_names[q]
                                                          : "x" + std::to_string(q + 1);
  const FittedModel po = fit(data, cl_po(), options);
  if (!po.converged) throw NumericalError("proportional cumulative fit did not converge");
  ModelSpec relaxed = cl_po();
  relaxed.relaxed = {q};
  const FittedModel rx = fit(data, relaxed, options);
  if (!rx.converged || !rx.diagnostics.valid)
    throw NumericalError("relaxed cumulative fit for predictor '" + r.name +
                         "' is invalid or did not converge");
  r.loglik_proportional = po.log_likelihood;
  r.loglik_relaxed = rx.log_likelihood;
  r.statistic = 2 * (rx.log_likelihood - po.log_likelihood);
  r.df = data.K - 2;
  const boost::math::chi_squared dist(r.df);
  r.p_value = boost::math::cdf(boost::math::complement(dist, std::max(0.0, r.statistic)));
  return r;
}

}  // namespace ordcal
