#pragma once

// Run manifests: everything needed to reproduce a CLI run, plus SHA-256
// digests of its inputs and outputs. Manifests carry no timestamps or host
// details so identical runs produce identical manifests.

#include <openssl/evp.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "melo/ids.hpp"

namespace melo {

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw NotFound("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;
  // Output files, recorded relative to the output directory.
  std::vector<std::string> outputs;

  [[nodiscard]] nlohmann::json to_json(const std::filesystem::path& out_dir) const {
    nlohmann::json in = nlohmann::json::object();
    for (const auto& p : inputs) in[p.string()] = sha256_file(p);
    nlohmann::json out = nlohmann::json::object();
    for (const auto& name : outputs) out[name] = sha256_file(out_dir / name);
    return {{"tool", "melo"},
            {"format", 1},
            {"subcommand", subcommand},
            {"config", config},
            {"seeds", seeds},
            {"inputs", in},
            {"outputs", out}};
  }

  void write(const std::filesystem::path& out_dir) const {
    std::ofstream f(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    f << to_json(out_dir).dump(2) << '\n';
    if (!f) throw Error("cannot write manifest in " + out_dir.string());
  }
};

}  // namespace melo
