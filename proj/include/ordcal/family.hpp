#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ordcal {

enum class Family { multinomial, cumulative, adjacent, continuation, stereotype };

struct ModelSpec {
  Family family = Family::multinomial;
  bool proportional = false;
  std::vector<int> relaxed;  // predictor indices freed from proportionality

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Throws SpecificationError for invalid combinations.
void validate(const ModelSpec& spec);

int param_count(const ModelSpec& spec, int Q, int K);

// Short names: mlr, cl-po, cl-np, ac-po, ac-np, cr-po, cr-np, slm.
ModelSpec parse_family(std::string_view name);
std::string family_name(const ModelSpec& spec);

// The eight families in display order.
const std::vector<ModelSpec>& all_families();

// MLR, CL-PO, AC-PO, SLM.
const std::vector<ModelSpec>& main_families();

inline ModelSpec mlr() { return {Family::multinomial, false, {}}; }
inline ModelSpec cl_po() { return {Family::cumulative, true, {}}; }
inline ModelSpec cl_np() { return {Family::cumulative, false, {}}; }
inline ModelSpec ac_po() { return {Family::adjacent, true, {}}; }
inline ModelSpec ac_np() { return {Family::adjacent, false, {}}; }
inline ModelSpec cr_po() { return {Family::continuation, true, {}}; }
inline ModelSpec cr_np() { return {Family::continuation, false, {}}; }
inline ModelSpec slm() { return {Family::stereotype, false, {}}; }

}  // namespace ordcal
