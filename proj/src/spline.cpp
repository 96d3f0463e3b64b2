#include "ordcal/spline.hpp"
#include "ordcal/types.hpp"

#include <algorithm>
#include <cmath>

namespace ordcal {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SplineBasis make_spline_basis(const Eigen::VectorXd& x, int df) {
  if (df < 1) throw DataError("spline basis needs df >= 1");
  if (x.size() == 0 || !x.allFinite()) throw DataError("spline basis needs finite values");
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  std::vector<double> u = s;
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (u.size() < 2) throw DataError("spline basis: input has no variation");

  SplineBasis b;
  b.degree = std::min(3, df);
  const int wanted = df - b.degree, wanted_degree = b.degree;
  int interior = wanted;
  // number of basis functions incl. the dropped one must not exceed distinct values
  while (interior > 0 && interior + b.degree + 1 > static_cast<int>(u.size())) --interior;
  while (b.degree > 1 && b.degree + 1 > static_cast<int>(u.size())) --b.degree;
  if (interior != wanted || b.degree != wanted_degree)
    b.warnings.push_back("spline basis reduced to " + std::to_string(interior) +
                         " interior knots, degree " + std::to_string(b.degree) + " (" +
                         std::to_string(u.size()) + " distinct values)");

  std::vector<double> inner;
  for (int j = 1; j <= interior; ++j) {
    const double q = sorted_quantile(s, static_cast<double>(j) / (interior + 1));
    if (q > s.front() && q < s.back() && (inner.empty() || q > inner.back())) inner.push_back(q);
  }
  if (static_cast<int>(inner.size()) != interior)
    b.warnings.push_back("tied quantiles merged spline knots");

  const int order = b.degree + 1;
  b.knots.resize(static_cast<Eigen::Index>(inner.size()) + 2 * order);
  Eigen::Index k = 0;
  for (int j = 0; j < order; ++j) b.knots(k++) = s.front();
  for (double v : inner) b.knots(k++) = v;
  for (int j = 0; j < order; ++j) b.knots(k++) = s.back();
  return b;
}

Eigen::MatrixXd SplineBasis::evaluate(const Eigen::VectorXd& x) const {
  const Eigen::Index nk = knots.size();
  const Eigen::Index nb = nk - degree - 1;  // all B-splines
  const double lo = knots(0), hi = knots(nk - 1);
  // last interval with positive width, used for the right boundary
  Eigen::Index last = nk - 2;
  while (last > 0 && knots(last) == knots(last + 1)) --last;

  Eigen::MatrixXd out(x.size(), nb - 1);
  std::vector<double> B(static_cast<size_t>(nk));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = std::clamp(x(i), lo, hi);
    std::fill(B.begin(), B.end(), 0.0);
    Eigen::Index span = last;
    for (Eigen::Index j = 0; j < last; ++j)
      if (v >= knots(j) && v < knots(j + 1)) {
        span = j;
        break;
      }
    B[static_cast<size_t>(span)] = 1.0;
    for (int p = 1; p <= degree; ++p)
      for (Eigen::Index j = 0; j + p + 1 < nk; ++j) {
        double val = 0;
        const double d1 = knots(j + p) - knots(j);
        const double d2 = knots(j + p + 1) - knots(j + 1);
        if (d1 > 0) val += (v - knots(j)) / d1 * B[static_cast<size_t>(j)];
        if (d2 > 0) val += (knots(j + p + 1) - v) / d2 * B[static_cast<size_t>(j + 1)];
        B[static_cast<size_t>(j)] = val;
      }
    for (Eigen::Index j = 1; j < nb; ++j) out(i, j - 1) = B[static_cast<size_t>(j)];
  }
  return out;
}

}  // namespace ordcal
