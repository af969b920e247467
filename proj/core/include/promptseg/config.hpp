// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace promptseg {

/// Flat key/value configuration read from a TOML-shaped file:
///
///   data_dir = "/var/lib/promptseg"
///   [embedding]
///   box_scale = 10
///
/// Section headers prefix the keys that follow them ("embedding.box_scale").
/// Only scalar values are supported: quoted strings, numbers, true/false.
class Config {
 public:
  static Config parse(std::string_view text);
  /// Missing file yields an empty config; unreadable or malformed files throw.
  static Config load(const std::filesystem::path& path);
  /// $XDG_CONFIG_HOME/promptseg/config.toml, else ~/.config/promptseg/config.toml.
  static std::filesystem::path default_path();

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// PROMPTSEG_DATA_DIR, else config key data_dir, else ~/.local/share/promptseg.
std::filesystem::path resolve_data_dir(const Config& cfg);

}  // namespace promptseg
