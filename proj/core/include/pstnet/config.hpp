#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace pstnet {

/// Flat `key = value` text config. Blank lines and lines starting with '#'
/// are ignored. Keys are dotted names such as `fusion.width`.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Throw ConfigError naming the key when it is absent or malformed.
  const std::string& get_string(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Keys in sorted order, one per line; parse(to_string()) round-trips.
  std::string to_string() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pstnet
