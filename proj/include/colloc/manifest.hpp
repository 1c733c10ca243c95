#ifndef COLLOC_MANIFEST_HPP
#define COLLOC_MANIFEST_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "colloc/errors.hpp"

// Run manifest: inputs (with content hashes), parameters, and the output
// file list. Deliberately carries no wall-clock state so reruns with the
// same inputs produce byte-identical manifests.

namespace colloc {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string fnv1a64_hex_of_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[8192];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

struct RunManifest {
  std::string subcommand;
  nlohmann::json parameters;
  std::vector<std::string> input_paths;
  std::vector<std::string> outputs; // file names within the output directory

  nlohmann::json to_json() const {
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& p : input_paths)
      inputs.push_back({{"path", p}, {"fnv1a64", fnv1a64_hex_of_file(p)}});
    return nlohmann::json{{"tool", "colloc-eval"},
                          {"version", std::string(kToolVersion)},
                          {"subcommand", subcommand},
                          {"parameters", parameters},
                          {"inputs", inputs},
                          {"outputs", outputs}};
  }
};

} // namespace colloc

#endif
