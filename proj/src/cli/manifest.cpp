#include "ordcal/cli.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

namespace ordcal::cli {

std::string tool_version() { return ORDCAL_VERSION; }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char b[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["arguments"] = m.arguments;
  if (m.seed)
    j["seed"] = *m.seed;
  else
    j["seed"] = nullptr;
  j["generator"] = m.generator;
  j["version"] = m.version;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [path, digest] : m.input_digests) j["inputs"][path] = {{"sha256", digest}};
  j["outputs"] = m.outputs;
  j["timestamp"] = m.timestamp;
  return j.dump(2) + "\n";
}

}  // namespace ordcal::cli
