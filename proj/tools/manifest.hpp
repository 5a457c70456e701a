#pragma once

// Run manifests: everything needed to repeat a CLI invocation and check that
// it reproduces the same bytes. No timestamps or host data are recorded, so a
// rerun rewrites an identical manifest.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "halfcloud/error.hpp"
#include "halfcloud/io.hpp"

namespace halfcloud::cli {

using Json = nlohmann::ordered_json;

/// Path recorded for artifacts written to standard output.
inline constexpr std::string_view kStdout = "-";

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(detail::read_file(path)); }

struct Artifact {
  std::string path;
  std::string sha256;
};

struct RunRecord {
  std::string command;
  std::vector<std::string> args;
  Json params = Json::object();
  std::vector<Artifact> inputs;
  std::optional<std::uint64_t> seed;
  std::vector<Artifact> outputs;

  void add_input(const std::filesystem::path& path) { inputs.push_back({path.string(), file_digest(path)}); }
  void add_output(std::string path, std::string_view bytes) { outputs.push_back({std::move(path), sha256_hex(bytes)}); }
};

inline Json to_json(const std::vector<Artifact>& list) {
  Json out = Json::array();
  for (const auto& a : list) out.push_back(Json{{"path", a.path}, {"sha256", a.sha256}});
  return out;
}

inline Json manifest_json(const RunRecord& r, std::string_view version) {
  Json j;
  j["tool"] = "halfcloud";
  j["version"] = version;
  j["command"] = r.command;
  j["args"] = r.args;
  j["params"] = r.params;
  j["inputs"] = to_json(r.inputs);
  j["seed"] = r.seed ? Json(*r.seed) : Json(nullptr);
  j["outputs"] = to_json(r.outputs);
  return j;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error("write failure on '" + path.string() + "'");
}

struct LoadedManifest {
  std::vector<std::string> args;
  std::vector<Artifact> inputs;
  std::vector<Artifact> outputs;
};

inline LoadedManifest load_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": not a manifest: " + e.what());
  }
  auto artifacts = [&](const char* key) {
    std::vector<Artifact> out;
    for (const auto& a : j.at(key)) out.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
    return out;
  };
  try {
    if (j.at("tool") != "halfcloud") throw Error(path.string() + ": not a halfcloud manifest");
    return {j.at("args").get<std::vector<std::string>>(), artifacts("inputs"), artifacts("outputs")};
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace halfcloud::cli
