#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace saferec {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record embedded in every output file: the subcommand, the
// full flag set, the seed, and a digest of each input file. Identical
// manifests must yield byte-identical primary outputs.
struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;  // path -> fnv1a64 hex
  std::string version = kToolVersion;

  void add_input(const std::string& path);
  std::string to_json_string() const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string file_digest(const std::string& path);

}  // namespace saferec
