#include "ordcal/family.hpp"
#include "ordcal/types.hpp"

#include <algorithm>
#include <cmath>

namespace ordcal {

void validate(const ModelSpec& spec) {
  if (spec.family == Family::multinomial && spec.proportional)
    throw SpecificationError("multinomial model cannot be proportional");
  if (spec.family == Family::stereotype && spec.proportional)
    throw SpecificationError("stereotype model carries no proportional flag");
  if (!spec.relaxed.empty()) {
    if (!spec.proportional)
      throw SpecificationError("relaxation set requires a proportional model");
    auto r = spec.relaxed;
    std::sort(r.begin(), r.end());
    if (std::adjacent_find(r.begin(), r.end()) != r.end() || r.front() < 0)
      throw SpecificationError("relaxation set must hold distinct non-negative indices");
  }
}

int param_count(const ModelSpec& spec, int Q, int K) {
  validate(spec);
  if (Q < 1 || K < 2) throw SpecificationError("param_count needs Q >= 1 and K >= 2");
  for (int q : spec.relaxed)
    if (q >= Q) throw SpecificationError("relaxed predictor index out of range");
  if (spec.family == Family::stereotype) return Q + 2 * K - 3;
  if (spec.proportional)
    return Q + K - 1 + static_cast<int>(spec.relaxed.size()) * (K - 2);
  return (Q + 1) * (K - 1);
}

ModelSpec parse_family(std::string_view name) {
  for (const auto& s : all_families())
    if (family_name(s) == name) return s;
  throw SpecificationError("unknown family '" + std::string(name) + "'");
}

std::string family_name(const ModelSpec& spec) {
  std::string base;
  switch (spec.family) {
    case Family::multinomial: return "mlr";
    case Family::stereotype: return "slm";
    case Family::cumulative: base = "cl"; break;
    case Family::adjacent: base = "ac"; break;
    case Family::continuation: base = "cr"; break;
  }
  base += spec.proportional ? "-po" : "-np";
  if (!spec.relaxed.empty()) {
    base += "[relaxed";
    for (int q : spec.relaxed) base += " " + std::to_string(q);
    base += "]";
  }
  return base;
}

const std::vector<ModelSpec>& all_families() {
  static const std::vector<ModelSpec> v{mlr(),   cl_po(), ac_po(), slm(),
                                        cr_po(), cr_np(), cl_np(), ac_np()};
  return v;
}

const std::vector<ModelSpec>& main_families() {
  static const std::vector<ModelSpec> v{mlr(), cl_po(), ac_po(), slm()};
  return v;
}

Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.K = d.K;
  out.column_names = d.column_names;
  out.predictors.resize(static_cast<Eigen::Index>(rows.size()), d.Q());
  out.outcomes.resize(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index i = 0; i < out.predictors.rows(); ++i) {
    out.predictors.row(i) = d.predictors.row(rows[i]);
    out.outcomes(i) = d.outcomes(rows[i]);
  }
  return out;
}

void check_dataset(const Dataset& d) {
  if (d.K < 2) throw DataError("K must be at least 2");
  if (d.outcomes.size() != d.n())
    throw DataError("outcome length does not match predictor rows");
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.outcomes(i) < 1 || d.outcomes(i) > d.K)
      throw DataError("row " + std::to_string(i + 1) + ": outcome " +
                      std::to_string(d.outcomes(i)) + " outside 1.." + std::to_string(d.K));
    for (Eigen::Index q = 0; q < d.Q(); ++q)
      if (!std::isfinite(d.predictors(i, q)))
        throw DataError("row " + std::to_string(i + 1) + ", column " + std::to_string(q + 1) +
                        ": non-finite predictor");
  }
}

Eigen::VectorXi category_counts(const Eigen::VectorXi& y, int K) {
  Eigen::VectorXi c = Eigen::VectorXi::Zero(K);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) >= 1 && y(i) <= K) ++c(y(i) - 1);
  return c;
}

}  // namespace ordcal
