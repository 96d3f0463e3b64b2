#include "ordcal/serialization.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ordcal {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "\"NaN\"";
  if (std::isinf(v)) return v > 0 ? "\"Infinity\"" : "\"-Infinity\"";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v(i));
  return s + "]";
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "NaN") return std::nan("");
    if (s == "Infinity") return HUGE_VAL;
    if (s == "-Infinity") return -HUGE_VAL;
  }
  throw DataError("model file: expected a number, got " + j.dump());
}

Eigen::VectorXd read_vec(const json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("model file: '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i]);
  return v;
}

}  // namespace

std::string model_to_json(const FittedModel& m) {
  ModelSpec base = m.spec;
  base.relaxed.clear();
  std::ostringstream o;
  o << "{\n";
  o << "  \"format\": \"ordcal-model\",\n";
  o << "  \"version\": " << kModelFormatVersion << ",\n";
  o << "  \"spec\": {\"family\": " << json(family_name(base)).dump() << ", \"relaxed\": "
    << json(m.spec.relaxed).dump() << "},\n";
  o << "  \"Q\": " << m.Q << ",\n";
  o << "  \"K\": " << m.K << ",\n";
  o << "  \"column_names\": " << json(m.column_names).dump() << ",\n";
  o << "  \"alpha\": " << vec(m.intercepts) << ",\n";
  // B row by row (one row per predictor)
  o << "  \"B\": [";
  for (Eigen::Index q = 0; q < m.coefficients.rows(); ++q)
    o << (q ? ", " : "") << vec(m.coefficients.row(q).transpose());
  o << "],\n";
  o << "  \"phi\": " << vec(m.scaling) << ",\n";
  o << "  \"logLik\": " << format_number(m.log_likelihood) << ",\n";
  o << "  \"iterations\": " << m.iterations << ",\n";
  o << "  \"converged\": " << (m.converged ? "true" : "false") << ",\n";
  o << "  \"tolerance\": " << format_number(m.tolerance) << ",\n";
  o << "  \"warnings\": " << json(m.diagnostics.warnings).dump() << "\n";
  o << "}\n";
  return o.str();
}

FittedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "ordcal-model") throw DataError("not an ordcal model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format version " + std::to_string(version));
    FittedModel m;
    m.spec = parse_family(j.at("spec").at("family").get<std::string>());
    m.spec.relaxed = j.at("spec").value("relaxed", std::vector<int>{});
    m.Q = j.at("Q").get<int>();
    m.K = j.at("K").get<int>();
    validate(m.spec);
    param_count(m.spec, m.Q, m.K);
    m.column_names = j.at("column_names").get<std::vector<std::string>>();
    m.intercepts = read_vec(j.at("alpha"), "alpha");
    const json& B = j.at("B");
    if (!B.is_array() || static_cast<int>(B.size()) != m.Q) throw DataError("model file: B must have Q rows");
    const Eigen::Index cols = B.empty() ? 0 : static_cast<Eigen::Index>(B[0].size());
    m.coefficients.resize(m.Q, cols);
    for (int q = 0; q < m.Q; ++q) {
      const Eigen::VectorXd row = read_vec(B[static_cast<size_t>(q)], "B");
      if (row.size() != cols) throw DataError("model file: ragged B");
      m.coefficients.row(q) = row.transpose();
    }
    m.scaling = read_vec(j.at("phi"), "phi");
    m.log_likelihood = number(j.at("logLik"));
    m.iterations = j.value("iterations", 0);
    m.converged = j.at("converged").get<bool>();
    m.tolerance = number(j.at("tolerance"));
    m.diagnostics.warnings = j.value("warnings", std::vector<std::string>{});
    if (m.intercepts.size() != m.K - 1) throw DataError("model file: alpha must have K-1 entries");
    const bool one_column = m.spec.family == Family::stereotype || (m.spec.proportional && m.spec.relaxed.empty());
    if (m.coefficients.cols() != (one_column ? 1 : m.K - 1)) throw DataError("model file: B has the wrong width");
    if (m.spec.family == Family::stereotype ? m.scaling.size() != m.K - 1 || m.scaling(0) != 1.0
                                            : m.scaling.size() != 0)
      throw DataError("model file: phi does not match the family");
    if (static_cast<int>(m.column_names.size()) != m.Q) throw DataError("model file: need Q column names");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::string& path) {
  const std::filesystem::path target(path);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << model_to_json(model);
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return model_from_json(s.str());
}

}  // namespace ordcal
