#include "ordcal/calibration.hpp"
#include "ordcal/links.hpp"
#include "ordcal/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ordcal {

std::string CalibrationTarget::label() const {
  switch (kind) {
    case TargetKind::category: return "category " + std::to_string(index);
    case TargetKind::dichotomy: return "dichotomy >=" + std::to_string(index);
    case TargetKind::linear_predictor: return "LP" + std::to_string(index);
  }
  return {};
}

namespace {

double clip(double p) { return std::clamp(p, kProbClip, 1 - kProbClip); }

double clipped_logit(double p) { return link::logit(clip(p)); }

// log-likelihood of a logistic model with linear predictor a + b x
double logistic_ll(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double a, double b) {
  double ll = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double eta = a + b * x(i);
    ll += y(i) * eta - link::softplus(eta);
  }
  return ll;
}

// Newton for (a, b), or for a alone with b held fixed. Each pass returns the
// log-likelihood with its derivatives; halving only runs after a failed step.
bool logistic_newton(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double& a, double& b,
                     bool free_slope) {
  double prev = -std::numeric_limits<double>::infinity();
  double da = 0, db = 0;
  for (int it = 0; it < 100; ++it) {
    double ll = 0, g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double eta = a + b * x(i);
      // one exponential serves both the probability and the log-likelihood
      const double e = std::exp(-std::abs(eta));
      const double p = eta >= 0 ? 1 / (1 + e) : e / (1 + e);
      const double w = p * (1 - p), r = y(i) - p;
      ll += y(i) * eta - (std::max(eta, 0.0) + std::log1p(e));
      g0 += r;
      h00 += w;
      if (free_slope) {
        g1 += r * x(i);
        h01 += w * x(i);
        h11 += w * x(i) * x(i);
      }
    }
    if (!std::isfinite(ll)) return false;
    if (ll < prev) {
      // overshoot: back off along the previous direction
      double scale = 0.5;
      for (int h = 0; h < 30; ++h, scale *= 0.5) {
        const double trial = logistic_ll(x, y, a - scale * da, b - scale * db);
        if (trial >= prev) {
          a -= scale * da;
          b -= scale * db;
          prev = -std::numeric_limits<double>::infinity();
          break;
        }
      }
      if (prev != -std::numeric_limits<double>::infinity()) {
        a -= da;
        b -= db;
        // no ascent from the previous point: stationary up to rounding, or stuck
        return relative_change(prev, ll) < 1e-10;
      }
      continue;
    }
    if (it > 0 && (relative_change(prev, ll) < 1e-11 || std::max(std::abs(da), std::abs(db)) < 1e-10))
      return true;
    prev = ll;
    if (free_slope) {
      const double det = h00 * h11 - h01 * h01;
      if (!(det > 0)) return false;
      da = (h11 * g0 - h01 * g1) / det;
      db = (h00 * g1 - h01 * g0) / det;
    } else {
      if (!(h00 > 0)) return false;
      da = g0 / h00;
      db = 0;
    }
    a += da;
    b += db;
  }
  return false;
}

Eigen::VectorXd indicator(const Eigen::VectorXi& y, int lo, int hi) {
  Eigen::VectorXd v(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) v(i) = (y(i) >= lo && y(i) <= hi) ? 1.0 : 0.0;
  return v;
}

NewtonResult fit_with_fallback(const VglmProblem& problem, const CoefMap& map,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& fallback) {
  NewtonResult r = newton_fit(problem, map, start);
  if (!r.valid) r = newton_fit(problem, map, fallback);
  return r;
}

}  // namespace

BinaryCalibration binary_calibration(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  BinaryCalibration c;
  double a = 0, b = 1;
  c.converged = logistic_newton(x, y, a, b, true);
  c.slope = b;
  double a1 = 0, one = 1;
  c.converged = logistic_newton(x, y, a1, one, false) && c.converged;
  c.intercept = a1;
  if (!std::isfinite(c.slope) || !std::isfinite(c.intercept)) c.converged = false;
  return c;
}

WeakCalibration weak_calibration(const ProbMatrix& probs, const Eigen::VectorXi& y,
                                 CalibrationTarget target) {
  const auto K = static_cast<int>(probs.K());
  if (y.size() != probs.n()) throw DataError("weak calibration: outcome length mismatch");
  Eigen::VectorXd x(probs.n()), event;
  if (target.kind == TargetKind::category) {
    if (target.index < 1 || target.index > K) throw DataError("no such category: " + target.label());
    for (Eigen::Index i = 0; i < probs.n(); ++i) x(i) = clipped_logit(probs.values(i, target.index - 1));
    event = indicator(y, target.index, target.index);
  } else if (target.kind == TargetKind::dichotomy) {
    if (target.index < 2 || target.index > K) throw DataError("no such dichotomy: " + target.label());
    for (Eigen::Index i = 0; i < probs.n(); ++i)
      x(i) = clipped_logit(probs.values.row(i).tail(K - target.index + 1).sum());
    event = indicator(y, target.index, K);
  } else {
    throw DataError("weak calibration targets a category or a dichotomy");
  }
  const double events = event.sum();
  if (events == 0 || events == static_cast<double>(event.size()))
    throw DataError("degenerate calibration target " + target.label() + ": all " +
                    (events == 0 ? "non-events" : "events"));
  const BinaryCalibration c = binary_calibration(x, event);
  WeakCalibration w{target, c.intercept, c.slope, c.converged, {}};
  if (!c.converged) w.message = "logistic recalibration did not converge";
  return w;
}

std::vector<WeakCalibration> weak_calibration_all(const ProbMatrix& probs, const Eigen::VectorXi& y) {
  std::vector<WeakCalibration> out;
  const auto K = static_cast<int>(probs.K());
  for (int k = 1; k <= K; ++k) out.push_back(weak_calibration(probs, y, {TargetKind::category, k}));
  for (int k = 2; k <= K; ++k) out.push_back(weak_calibration(probs, y, {TargetKind::dichotomy, k}));
  return out;
}

std::vector<WeakCalibration> model_specific_calibration(const FittedModel& model, const Dataset& data) {
  return model_specific_calibration(model.spec, linear_predictors(model, data.predictors),
                                    data.outcomes, model.K);
}

std::vector<WeakCalibration> model_specific_calibration(const ModelSpec& spec,
                                                        const Eigen::MatrixXd& lp,
                                                        const Eigen::VectorXi& y, int K) {
  const int m = K - 1;
  const Eigen::Index n = lp.rows();
  if (lp.cols() != m) throw DataError("linear predictor matrix must have K-1 columns");
  if (y.size() != n) throw DataError("model-specific calibration: outcome length mismatch");
  const Link link = model_link(spec);
  const Eigen::VectorXi y0 = y.array() - 1;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::VectorXd null = null_intercepts(link, category_counts(y, K));
  std::vector<WeakCalibration> out;

  auto flag = [](WeakCalibration& w, const NewtonResult& r, const char* what) {
    if (!r.converged || !r.valid) {
      w.converged = false;
      if (!w.message.empty()) w.message += "; ";
      w.message += std::string(what) + ": " + (r.message.empty() ? "invalid fit" : r.message);
    }
  };

  if (spec.proportional) {
    // Without relaxed predictors L_k - L_j is constant, so every LP defines the
    // same recalibration model and one pair of fits serves all of them.
    const bool shared = spec.relaxed.empty();
    Eigen::VectorXd first_intercepts;
    for (int j = 0; j < m; ++j) {
      WeakCalibration w;
      w.target = {TargetKind::linear_predictor, j + 1};
      if (shared && j > 0) {
        w.slope = out.front().slope;
        w.converged = out.front().converged;
        w.message = out.front().message;
        w.intercept = first_intercepts(j) - (lp.col(j) - lp.col(0)).mean();
        out.push_back(w);
        continue;
      }
      Eigen::VectorXd shift(m);
      for (int k = 0; k < m; ++k) shift(k) = (lp.col(k) - lp.col(j)).mean();

      Eigen::MatrixXd Z(n, 2);
      Z.col(0).setOnes();
      Z.col(1) = lp.col(j);
      VglmProblem slope_problem(link, K, Z, y0);
      Eigen::VectorXd start(m + 1), fallback = Eigen::VectorXd::Zero(m + 1);
      start << shift, 1.0;
      fallback.head(m) = null;
      const auto rs = fit_with_fallback(slope_problem, constrained_map({I, Eigen::MatrixXd::Ones(m, 1)}),
                                        start, fallback);
      w.slope = rs.theta(m);
      flag(w, rs, "slope fit");

      const Eigen::MatrixXd offset = lp.col(j).replicate(1, m);
      VglmProblem int_problem(link, K, ones, y0, &offset);
      const auto ri = fit_with_fallback(int_problem, constrained_map({I}), shift,
                                        null - Eigen::VectorXd::Constant(m, lp.col(j).mean()));
      w.intercept = ri.theta(j);
      if (j == 0) first_intercepts = ri.theta;
      flag(w, ri, "intercept fit");
      out.push_back(w);
    }
    return out;
  }

  Eigen::MatrixXd Z(n, m + 1);
  Z.col(0).setOnes();
  Z.rightCols(m) = lp;
  std::vector<Eigen::MatrixXd> H{I};
  for (int j = 0; j < m; ++j) H.push_back(I.col(j));
  VglmProblem slope_problem(link, K, Z, y0);
  Eigen::VectorXd start(2 * m), fallback = Eigen::VectorXd::Zero(2 * m);
  start << Eigen::VectorXd::Zero(m), Eigen::VectorXd::Ones(m);
  fallback.head(m) = null;
  const auto rs = fit_with_fallback(slope_problem, constrained_map(H), start, fallback);

  VglmProblem int_problem(link, K, ones, y0, &lp);
  Eigen::VectorXd int_fallback = null;
  for (int j = 0; j < m; ++j) int_fallback(j) -= lp.col(j).mean();
  const auto ri = fit_with_fallback(int_problem, constrained_map({I}), Eigen::VectorXd::Zero(m),
                                    int_fallback);
  for (int j = 0; j < m; ++j) {
    WeakCalibration w;
    w.target = {TargetKind::linear_predictor, j + 1};
    w.slope = rs.theta(m + j);
    w.intercept = ri.theta(j);
    flag(w, rs, "slope fit");
    flag(w, ri, "intercept fit");
    out.push_back(w);
  }
  return out;
}

std::string setup_name(RecalSetup setup) {
  switch (setup) {
    case RecalSetup::mlr_reference: return "mlr-reference";
    case RecalSetup::cr_reference: return "cr-reference";
    case RecalSetup::mlr_dichotomy: return "mlr-dichotomy";
    case RecalSetup::cr_dichotomy: return "cr-dichotomy";
    case RecalSetup::mlr_category: return "mlr-category";
    case RecalSetup::cr_category: return "cr-category";
  }
  return {};
}

const std::vector<RecalSetup>& all_setups() {
  static const std::vector<RecalSetup> v{RecalSetup::mlr_reference, RecalSetup::cr_reference,
                                         RecalSetup::mlr_dichotomy, RecalSetup::cr_dichotomy,
                                         RecalSetup::mlr_category,  RecalSetup::cr_category};
  return v;
}

RecalSetup parse_setup(const std::string& name) {
  for (auto s : all_setups())
    if (setup_name(s) == name) return s;
  throw DataError("unknown recalibration setup '" + name + "'");
}

FlexibleRecalibration flexible_recalibration(const ProbMatrix& probs, const Eigen::VectorXi& y,
                                             RecalSetup setup, int df) {
  const auto K = static_cast<int>(probs.K());
  const int m = K - 1;
  const Eigen::Index n = probs.n();
  if (y.size() != n) throw DataError("flexible recalibration: outcome length mismatch");
  FlexibleRecalibration rec;
  rec.setup = setup;
  rec.df = df;
  if (n < 10 * K * df)
    rec.warnings.push_back("fewer than 10*K*df rows (" + std::to_string(n) + ")");

  const Eigen::MatrixXd P = probs.values.unaryExpr([](double p) { return clip(p); });
  Eigen::MatrixXd T(n, m);
  for (int j = 0; j < m; ++j) {
    switch (setup) {
      case RecalSetup::mlr_reference:
      case RecalSetup::cr_reference:
        T.col(j) = (P.col(j + 1).array().log() - P.col(0).array().log()).matrix();
        break;
      case RecalSetup::mlr_dichotomy:
      case RecalSetup::cr_dichotomy:
        for (Eigen::Index i = 0; i < n; ++i)
          T(i, j) = clipped_logit(probs.values.row(i).tail(K - j - 1).sum());
        break;
      case RecalSetup::mlr_category:
      case RecalSetup::cr_category:
        for (Eigen::Index i = 0; i < n; ++i) T(i, j) = link::logit(P(i, j));
        break;
    }
  }

  std::vector<Eigen::MatrixXd> bases;
  Eigen::Index cols = 1;
  for (int j = 0; j < m; ++j) {
    const double lo = T.col(j).minCoeff(), hi = T.col(j).maxCoeff();
    if (!(hi - lo > 1e-12 * (1 + std::abs(hi))))
      throw DataError("degenerate basis: transformed predictor " + std::to_string(j + 1) +
                      " has no variation");
    SplineBasis basis = make_spline_basis(T.col(j), df);
    for (auto& w : basis.warnings) rec.warnings.push_back("predictor " + std::to_string(j + 1) + ": " + w);
    bases.push_back(basis.evaluate(T.col(j)));
    cols += bases.back().cols();
  }
  Eigen::MatrixXd Zfull(n, cols);
  Zfull.col(0).setOnes();
  std::vector<int> owner{-1};
  Eigen::Index at = 1;
  for (int j = 0; j < m; ++j) {
    Zfull.middleCols(at, bases[static_cast<size_t>(j)].cols()) = bases[static_cast<size_t>(j)];
    at += bases[static_cast<size_t>(j)].cols();
    for (Eigen::Index c = 0; c < bases[static_cast<size_t>(j)].cols(); ++c) owner.push_back(j);
  }

  // Drop aliased and nearly aliased columns. Transforms of one proportional-odds
  // score are smooth functions of each other, and a looser threshold leaves
  // Newton with a singular-looking Hessian and runaway coefficients.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Zfull);
  qr.setThreshold(1e-6);
  std::vector<int> keep;
  for (Eigen::Index r = 0; r < qr.rank(); ++r) keep.push_back(static_cast<int>(qr.colsPermutation().indices()(r)));
  if (std::find(keep.begin(), keep.end(), 0) == keep.end()) keep.push_back(0);
  std::sort(keep.begin(), keep.end());
  if (static_cast<Eigen::Index>(keep.size()) < cols)
    rec.warnings.push_back(std::to_string(cols - static_cast<Eigen::Index>(keep.size())) +
                           " aliased spline columns dropped");
  Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(keep.size()));
  rec.basis_columns.assign(static_cast<size_t>(m), 0);
  for (size_t c = 0; c < keep.size(); ++c) {
    Z.col(static_cast<Eigen::Index>(c)) = Zfull.col(keep[c]);
    if (owner[static_cast<size_t>(keep[c])] >= 0) ++rec.basis_columns[static_cast<size_t>(owner[static_cast<size_t>(keep[c])])];
  }

  const bool cr = setup == RecalSetup::cr_reference || setup == RecalSetup::cr_dichotomy ||
                  setup == RecalSetup::cr_category;
  const Link link = cr ? Link::continuation : Link::multinomial;
  const Eigen::VectorXi y0 = y.array() - 1;
  VglmProblem problem(link, K, Z, y0);
  const CoefMap map = constrained_map(std::vector<Eigen::MatrixXd>(keep.size(), Eigen::MatrixXd::Identity(m, m)));
  Eigen::VectorXd start = Eigen::VectorXd::Zero(map.size);
  start.head(m) = null_intercepts(link, category_counts(y, K));
  const NewtonResult r = newton_fit(problem, map, start);
  if (!r.valid || !r.converged)
    throw NumericalError("flexible recalibration (" + setup_name(setup) + ") did not converge: " + r.message);
  rec.converged = true;
  rec.coefficients = r.theta;
  rec.log_likelihood = -r.nll;
  rec.observed = probs_from_eta(link, problem.eta(map.coef(r.theta)).transpose()).values;
  return rec;
}

double eci(const ProbMatrix& probs, const FlexibleRecalibration& recal, const Eigen::VectorXi& y,
           EciVariant variant) {
  if (recal.observed.rows() != probs.n() || recal.observed.cols() != probs.K())
    throw DataError("eci: dimension mismatch");
  const double K = static_cast<double>(probs.K());
  const double num = (probs.values - recal.observed).squaredNorm();
  if (variant == EciVariant::original)
    return num / (static_cast<double>(probs.n()) * K) * 100.0 * K / 2.0;
  if (y.size() != probs.n()) throw DataError("eci: outcome length mismatch");
  Eigen::RowVectorXd rate = category_counts(y, static_cast<int>(probs.K())).cast<double>().transpose();
  rate /= static_cast<double>(y.size());
  const double den = (probs.values.rowwise() - rate).squaredNorm();
  if (den < 1e-12) throw NumericalError("no predictive variation");
  return num / den;
}

Eigen::VectorXd local_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& at, double span) {
  const Eigen::Index n = x.size();
  const auto q = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(span * static_cast<double>(n))), 1, n);
  Eigen::VectorXd out(at.size());
  std::vector<double> d(static_cast<size_t>(n));
  for (Eigen::Index g = 0; g < at.size(); ++g) {
    const double x0 = at(g);
    for (Eigen::Index i = 0; i < n; ++i) d[static_cast<size_t>(i)] = std::abs(x(i) - x0);
    std::vector<double> tmp = d;
    std::nth_element(tmp.begin(), tmp.begin() + (q - 1), tmp.end());
    double h = tmp[static_cast<size_t>(q - 1)];
    if (span > 1) h *= span;
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double w;
      if (h > 0) {
        const double u = d[static_cast<size_t>(i)] / h;
        if (u >= 1) continue;
        const double c = 1 - u * u * u;
        w = c * c * c;
      } else {
        if (d[static_cast<size_t>(i)] > 0) continue;
        w = 1;
      }
      const double dx = x(i) - x0;
      s0 += w;
      s1 += w * dx;
      s2 += w * dx * dx;
      t0 += w * y(i);
      t1 += w * dx * y(i);
    }
    const double det = s0 * s2 - s1 * s1;
    out(g) = det > 1e-12 * s0 * s0 ? (s2 * t0 - s1 * t1) / det : (s0 > 0 ? t0 / s0 : 0.0);
  }
  return out;
}

CalibrationCurves calibration_curve_data(const ProbMatrix& probs, const FlexibleRecalibration& recal,
                                         CurveMode mode) {
  if (recal.observed.rows() != probs.n() || recal.observed.cols() != probs.K())
    throw DataError("calibration curve: dimension mismatch");
  const auto K = static_cast<int>(probs.K());
  CalibrationCurves out;
  out.mode = mode;
  const int first = mode == CurveMode::category ? 1 : 2;
  for (int k = first; k <= K; ++k) {
    CurveTarget t;
    Eigen::VectorXd est, obs;
    if (mode == CurveMode::category) {
      t.label = "category " + std::to_string(k);
      est = probs.values.col(k - 1);
      obs = recal.observed.col(k - 1);
    } else {
      t.label = "dichotomy >=" + std::to_string(k);
      est = probs.values.rightCols(K - k + 1).rowwise().sum();
      obs = recal.observed.rightCols(K - k + 1).rowwise().sum();
    }
    t.scatter.resize(est.size(), 2);
    t.scatter << est, obs;
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(101, est.minCoeff(), est.maxCoeff());
    t.curve.resize(101, 2);
    t.curve << grid, local_linear(est, obs, grid, 0.75);
    out.targets.push_back(std::move(t));
  }
  return out;
}

}  // namespace ordcal
