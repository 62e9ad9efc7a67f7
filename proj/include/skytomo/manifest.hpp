#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace skytomo {

/// Hex SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_hash(const std::filesystem::path& path);
std::string git_blob_hash_bytes(const std::string& bytes);

/// Record of one command invocation, written as JSON.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  nlohmann::json& config() { return config_; }
  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void add_input(const std::filesystem::path& path);
  /// Records the path with its blob hash (null when the file does not exist yet).
  void add_output(const std::filesystem::path& path);
  void add_timing(const std::string& name, double seconds) { timings_[name] = seconds; }

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  std::map<std::string, std::uint64_t> seeds_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::optional<std::string>> outputs_;
  std::map<std::string, double> timings_;
};

}  // namespace skytomo
