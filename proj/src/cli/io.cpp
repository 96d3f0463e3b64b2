#include "ordcal/cli.hpp"
#include "ordcal/serialization.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace ordcal::cli {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const std::string t = trim(cell);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw DataError("row " + std::to_string(row) + ", column '" + column + "': not a number: '" + cell + "'");
  return v;
}

std::string num(double v) {
  const std::string s = format_number(v);
  return s.front() == '"' ? s.substr(1, s.size() - 2) : s;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line, line_no);
    if (t.header.empty()) {
      for (auto& c : cells) c = trim(c);
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw DataError(path + ": empty file");
  return t;
}

std::string to_csv(const CsvTable& table) {
  std::ostringstream o;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) o << (i ? "," : "") << quote(cells[i]);
    o << "\n";
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return o.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  auto tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

LoadedData load_dataset(const std::string& path, const std::string& outcome, const std::string& truth_prefix) {
  const CsvTable t = read_csv(path);
  int y_col = -1;
  std::vector<int> predictors;
  std::vector<std::pair<int, int>> truth_cols;  // (column, category)
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    const auto& name = t.header[static_cast<size_t>(c)];
    if (name == outcome) {
      y_col = c;
    } else if (!truth_prefix.empty() && name.rfind(truth_prefix, 0) == 0) {
      const std::string idx = name.substr(truth_prefix.size());
      int k = 0;
      const auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), k);
      if (ec != std::errc() || p != idx.data() + idx.size() || k < 1)
        throw DataError("column '" + name + "': truth columns must be named " + truth_prefix + "1.." + truth_prefix + "K");
      truth_cols.emplace_back(c, k);
    } else {
      predictors.push_back(c);
    }
  }
  if (y_col < 0) throw DataError(path + ": missing outcome column '" + outcome + "'");
  if (t.rows.empty()) throw DataError(path + ": no data rows");

  LoadedData out;
  Dataset& d = out.data;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.predictors.resize(n, static_cast<Eigen::Index>(predictors.size()));
  d.outcomes.resize(n);
  for (int c : predictors) d.column_names.push_back(t.header[static_cast<size_t>(c)]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<size_t>(i)];
    const std::size_t row_no = static_cast<std::size_t>(i) + 1;
    const double yv = parse_number(row[static_cast<size_t>(y_col)], row_no, outcome);
    if (yv != std::floor(yv) || yv < 1 || yv > 1e6)
      throw DataError("row " + std::to_string(row_no) + ": outcome '" + row[static_cast<size_t>(y_col)] +
                      "' is not a label in 1..K");
    d.outcomes(i) = static_cast<int>(yv);
    for (std::size_t q = 0; q < predictors.size(); ++q) {
      const std::string& name = t.header[static_cast<size_t>(predictors[q])];
      const double v = parse_number(row[static_cast<size_t>(predictors[q])], row_no, name);
      if (!std::isfinite(v)) throw DataError("row " + std::to_string(row_no) + ", column '" + name + "': non-finite value");
      d.predictors(i, static_cast<Eigen::Index>(q)) = v;
    }
  }
  d.K = d.outcomes.maxCoeff();
  if (d.K < 2) throw DataError(path + ": need at least two outcome categories (K >= 2)");
  check_dataset(d);

  if (!truth_cols.empty()) {
    const int K = static_cast<int>(truth_cols.size());
    std::vector<int> col_of(static_cast<size_t>(K), -1);
    for (auto [c, k] : truth_cols) {
      if (k > K || col_of[static_cast<size_t>(k - 1)] >= 0)
        throw DataError("truth columns must be exactly " + truth_prefix + "1.." + truth_prefix + std::to_string(K));
      col_of[static_cast<size_t>(k - 1)] = c;
    }
    if (K < d.K) throw DataError("truth has " + std::to_string(K) + " columns but labels reach " + std::to_string(d.K));
    // labels may not reach the top category in small files; the truth fixes K
    d.K = K;
    Eigen::MatrixXd P(n, K);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) {
        const int c = col_of[static_cast<size_t>(k)];
        P(i, k) = parse_number(t.rows[static_cast<size_t>(i)][static_cast<size_t>(c)], static_cast<std::size_t>(i) + 1,
                               t.header[static_cast<size_t>(c)]);
      }
    out.truth = make_probs(std::move(P));
  }
  return out;
}

std::string dataset_csv(const Dataset& data, const ProbMatrix* truth) {
  CsvTable t;
  t.header = data.column_names;
  for (Eigen::Index q = static_cast<Eigen::Index>(t.header.size()); q < data.Q(); ++q)
    t.header.push_back("x" + std::to_string(q + 1));
  t.header.push_back("y");
  if (truth)
    for (Eigen::Index k = 1; k <= truth->K(); ++k) t.header.push_back("truth_" + std::to_string(k));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> r;
    for (Eigen::Index q = 0; q < data.Q(); ++q) r.push_back(num(data.predictors(i, q)));
    r.push_back(std::to_string(data.outcomes(i)));
    if (truth)
      for (Eigen::Index k = 0; k < truth->K(); ++k) r.push_back(num(truth->values(i, k)));
    t.rows.push_back(std::move(r));
  }
  return to_csv(t);
}

std::string probs_csv(const ProbMatrix& probs) {
  CsvTable t;
  for (Eigen::Index k = 1; k <= probs.K(); ++k) t.header.push_back("p_" + std::to_string(k));
  t.header.push_back("valid");
  for (Eigen::Index i = 0; i < probs.n(); ++i) {
    std::vector<std::string> r;
    for (Eigen::Index k = 0; k < probs.K(); ++k) r.push_back(num(probs.values(i, k)));
    r.push_back(probs.valid.size() == 0 || probs.valid(i) ? "1" : "0");
    t.rows.push_back(std::move(r));
  }
  return to_csv(t);
}

}  // namespace ordcal::cli
