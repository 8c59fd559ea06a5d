#include "saferec/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "saferec/error.hpp"

namespace saferec {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "IoError", "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << fnv1a64(buffer.str());
  return hex.str();
}

void RunManifest::add_input(const std::string& path) { input_digests[path] = file_digest(path); }

std::string RunManifest::to_json_string() const {
  json j;
  j["subcommand"] = subcommand;
  j["flags"] = flags;
  j["seed"] = seed;
  j["inputs"] = input_digests;
  j["version"] = version;
  return j.dump();
}

}  // namespace saferec
