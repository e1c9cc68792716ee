#pragma once

#include <lfiw/digest.hpp>
#include <lfiw/io.hpp>
#include <lfiw/types.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lfiw::io {

/// Record of one CLI run: config snapshot, seed streams consumed, wall-clock
/// duration, and digests of every emitted artifact. Written next to the
/// outputs; `verify` recomputes the digests.
struct RunManifest {
  std::string command;
  json config;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::vector<std::string> seed_streams;
  std::int64_t duration_ms = 0;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256

  void add_output(const std::string& path) {
    outputs.emplace_back(path, sha256_file(path));
  }

  json to_json() const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["version"] = version;
    j["seed"] = seed;
    j["seed_streams"] = seed_streams;
    j["duration_ms"] = duration_ms;
    json outs = json::array();
    for (const auto& [path, digest] : outputs)
      outs.push_back({{"path", path}, {"sha256", digest}});
    j["outputs"] = outs;
    return j;
  }

  void write(const std::string& path) const { atomic_write(path, to_json().dump(2) + "\n"); }
};

enum class VerifyStatus { ok, mismatch, missing };

/// Recomputes artifact digests listed in a manifest. Paths are resolved
/// relative to the manifest's directory.
inline VerifyStatus verify_manifest(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  if (!fs::exists(manifest_path)) return VerifyStatus::missing;
  const json j = json::parse(read_file(manifest_path));
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& out : j.at("outputs")) {
    fs::path p = out.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) return VerifyStatus::missing;
    if (sha256_file(p.string()) != out.at("sha256").get<std::string>())
      return VerifyStatus::mismatch;
  }
  return VerifyStatus::ok;
}

}  // namespace lfiw::io
