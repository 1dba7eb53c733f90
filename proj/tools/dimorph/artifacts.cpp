#include "artifacts.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dimorph::cli {

namespace fs = std::filesystem;

void write_file_atomic(const std::string& path, const std::string& content) {
  static std::atomic<unsigned long> counter{0};
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(tid) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename onto '" + path + "': " + ec.message());
  }
}

std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

ArtifactSet::ArtifactSet(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ArtifactSet::path_of(const std::string& file) const { return (fs::path(dir_) / file).string(); }

void ArtifactSet::write(const std::string& file, const std::string& content) {
  write_file_atomic(path_of(file), content);
  for (Entry& e : entries_) {
    if (e.file == file) {
      e = {file, sha256_hex(content), content.size()};
      return;
    }
  }
  entries_.push_back({file, sha256_hex(content), content.size()});
}

void ArtifactSet::write_json(const std::string& file, const nlohmann::json& j) { write(file, j.dump(2) + "\n"); }

void ArtifactSet::write_manifest(const nlohmann::json& run) {
  nlohmann::json files = nlohmann::json::array();
  for (const Entry& e : entries_) files.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  const nlohmann::json manifest{{"run", run}, {"files", files}};
  write_file_atomic(path_of("manifest.json"), manifest.dump(2) + "\n");
}

}  // namespace dimorph::cli
