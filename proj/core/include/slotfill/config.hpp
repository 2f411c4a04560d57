#pragma once

/// \file config.hpp
/// \brief `key = value` run configuration and key=value run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slotfill {

/// Line-oriented `key = value` settings. Blank lines and lines starting
/// with '#' are ignored; whitespace around keys and values is trimmed.
/// A repeated key keeps its last value. Syntax errors raise ConfigError.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text, std::string_view source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  std::optional<std::string> get(std::string_view key) const;
  bool contains(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Ordered key=value lines. The timestamp line is the only entry that varies
/// between otherwise identical runs.
class Manifest {
 public:
  void add(std::string key, std::string value);
  void add(std::string key, double value);
  void add(std::string key, std::uint64_t value);
  void add_all(const std::vector<std::pair<std::string, std::string>>& entries);
  void add_timestamp();

  /// Adds "checksum.<name>=<fnv1a64 hex>" of the file's bytes.
  void add_checksum(const std::string& name, const std::filesystem::path& path);

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// FNV-1a 64 over the file's contents, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

/// Shortest round-trippable decimal form.
std::string format_number(double value);

}  // namespace slotfill
