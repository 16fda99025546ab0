#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "panelci/errors.hpp"
#include "panelci/panel.hpp"

namespace panelci::cli {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(const std::string& data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "' for hashing");
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  return h.hex();
}

struct FileDigest {
  std::string path;
  std::string sha256;
  bool operator==(const FileDigest&) const = default;
};

inline void to_json(nlohmann::json& j, const FileDigest& d) { j = {{"path", d.path}, {"sha256", d.sha256}}; }
inline void from_json(const nlohmann::json& j, FileDigest& d) {
  j.at("path").get_to(d.path);
  j.at("sha256").get_to(d.sha256);
}

struct RunManifest {
  int schema_version = kSchemaVersion;
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::string config_hash;
  std::vector<FileDigest> inputs;
  std::optional<std::uint64_t> seed;
  std::string tool_version;
  std::string timestamp;
  std::vector<std::string> outputs;

  bool operator==(const RunManifest&) const = default;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"schema_version", m.schema_version}, {"command", m.command},           {"config", m.config},
       {"config_hash", m.config_hash},       {"inputs", m.inputs},             {"tool_version", m.tool_version},
       {"timestamp", m.timestamp},           {"outputs", m.outputs}};
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
  j.at("schema_version").get_to(m.schema_version);
  j.at("command").get_to(m.command);
  m.config = j.at("config");
  j.at("config_hash").get_to(m.config_hash);
  j.at("inputs").get_to(m.inputs);
  j.at("tool_version").get_to(m.tool_version);
  j.at("timestamp").get_to(m.timestamp);
  j.at("outputs").get_to(m.outputs);
  if (j.at("seed").is_null())
    m.seed.reset();
  else
    m.seed = j.at("seed").get<std::uint64_t>();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace panelci::cli
