#pragma once

#include "ordcal/model.hpp"

#include <string>

namespace ordcal {

constexpr int kModelFormatVersion = 1;

// Versioned JSON document: spec, Q, K, column names, alpha, B, phi, logLik,
// converged, tolerance. Numbers keep 17 significant digits.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

// Shortest-safe text for a double: 17 significant digits, "NaN"/"Infinity" spelled out.
std::string format_number(double v);

}  // namespace ordcal
