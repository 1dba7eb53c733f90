#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace dimorph::cli {

/// Writes content to a sibling temp file, flushes it and renames it over path.
void write_file_atomic(const std::string& path, const std::string& content);

/// Lower-case hex SHA-256 of data.
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

/// Collects the files of one run in an output directory and writes manifest.json.
class ArtifactSet {
 public:
  struct Entry {
    std::string file;  // relative to the directory
    std::string sha256;
    std::size_t bytes = 0;
  };

  explicit ArtifactSet(std::string dir);

  const std::string& dir() const { return dir_; }
  std::string path_of(const std::string& file) const;

  void write(const std::string& file, const std::string& content);
  void write_json(const std::string& file, const nlohmann::json& j);

  const std::vector<Entry>& entries() const { return entries_; }

  /// Writes manifest.json listing every file written so far. `run` describes the run
  /// (subcommand, seed, config hash); it must not contain timestamps.
  void write_manifest(const nlohmann::json& run);

 private:
  std::string dir_;
  std::vector<Entry> entries_;
};

}  // namespace dimorph::cli
