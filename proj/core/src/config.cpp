#include "slotfill/config.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include "slotfill/error.hpp"
#include "slotfill/text.hpp"

namespace slotfill {

RunConfig RunConfig::parse(std::string_view text, std::string_view source) {
  RunConfig config;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": empty key");
    config.set(std::move(key), trim(std::string_view(line).substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path.string());
}

std::optional<std::string> RunConfig::get(std::string_view key) const {
  auto it = values_.find(std::string(key));
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string format_number(double value) {
  char buf[32];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

void Manifest::add(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }

void Manifest::add(std::string key, double value) { add(std::move(key), format_number(value)); }

void Manifest::add(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }

void Manifest::add_all(const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [k, v] : entries) add(k, v);
}

void Manifest::add_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  add("timestamp", std::string(buf));
}

void Manifest::add_checksum(const std::string& name, const std::filesystem::path& path) {
  add("checksum." + name, file_checksum(path));
}

std::string Manifest::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_text();
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t h = kFnvOffsetBasis;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

}  // namespace slotfill
