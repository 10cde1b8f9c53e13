#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace msnt {

// Line-oriented key=value settings. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;

  // Typed getters throw ConfigError when the value does not parse.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // key=value lines in key order.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t parse_u64(std::string_view text, const std::string& what);

// MSNT_SEED when set, else the config's "seed" key, else `fallback`.
std::uint64_t resolve_seed(const Config& config, std::uint64_t fallback = 0);

}  // namespace msnt
