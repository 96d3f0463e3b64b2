#include "ordcal/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace ordcal {

namespace {

std::vector<Eigen::Index> score_order(const Eigen::VectorXd& score) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(score.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return score(a) < score(b); });
  return idx;
}

// Walks tie groups in ascending score order.
double c_from_order(const std::vector<Eigen::Index>& order, const Eigen::VectorXd& score,
                    const Eigen::VectorXi& y, int lo, int hi) {
  double lo_below = 0, concordant = 0, n_lo = 0, n_hi = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    double g_lo = 0, g_hi = 0;
    while (j < order.size() && score(order[j]) == score(order[i])) {
      const int yy = y(order[j]);
      if (yy == lo) ++g_lo;
      else if (yy == hi) ++g_hi;
      ++j;
    }
    concordant += g_hi * (lo_below + 0.5 * g_lo);
    lo_below += g_lo;
    n_lo += g_lo;
    n_hi += g_hi;
    i = j;
  }
  if (n_lo == 0 || n_hi == 0) return std::numeric_limits<double>::quiet_NaN();
  return concordant / (n_lo * n_hi);
}

}  // namespace

double pairwise_c(const Eigen::VectorXd& score, const Eigen::VectorXi& y, int lo, int hi) {
  return c_from_order(score_order(score), score, y, lo, hi);
}

OrcResult orc_detail(const Eigen::VectorXd& score, const Eigen::VectorXi& y, int K) {
  if (score.size() != y.size()) throw DataError("orc: score and outcome lengths differ");
  if (!score.allFinite()) throw DataError("orc: non-finite score");
  const auto order = score_order(score);
  OrcResult r;
  double total = 0;
  for (int a = 1; a <= K; ++a)
    for (int b = a + 1; b <= K; ++b) {
      const double c = c_from_order(order, score, y, a, b);
      if (std::isnan(c)) {
        r.warnings.push_back("pair (" + std::to_string(a) + ", " + std::to_string(b) +
                             ") skipped: category absent");
        continue;
      }
      total += c;
      ++r.pairs_used;
    }
  if (r.pairs_used == 0) throw DataError("orc needs at least two outcome categories present");
  r.value = total / r.pairs_used;
  return r;
}

}  // namespace ordcal
