#pragma once

#include "ordcal/simulation.hpp"
#include "ordcal/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ordcal::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kNumericalError = 2;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);
std::string to_csv(const CsvTable& table);

// Writes to a temporary sibling, then renames over `path`.
void write_atomic(const std::string& path, const std::string& content);

struct LoadedData {
  Dataset data;
  std::optional<ProbMatrix> truth;
};

// Outcome column must hold integers 1..K (K = largest label); columns named
// truth_prefix + k become the truth matrix; every other column is a predictor.
LoadedData load_dataset(const std::string& path, const std::string& outcome = "y",
                        const std::string& truth_prefix = "truth_");

std::string dataset_csv(const Dataset& data, const ProbMatrix* truth);

std::string probs_csv(const ProbMatrix& probs);

std::string sha256_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::optional<std::uint64_t> seed;
  std::string generator;
  std::string version;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::vector<std::string> outputs;
  std::string timestamp;
};

std::string manifest_json(const RunManifest& m);

std::string tool_version();

// Entry point of the ordcal executable.
int run(int argc, char** argv);

}  // namespace ordcal::cli
