// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpgan::cli {

/// Bad configuration: unknown key, malformed value, missing path. Maps to
/// exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every accepted "section.key" with its default.
const std::vector<KeySpec>& config_schema();

/// Plain-text "section.key = value" settings. '#' starts a comment; blank
/// lines are ignored. Unknown keys and repeated keys are rejected.
class RunConfig {
 public:
  RunConfig();  // all defaults

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_set(const std::string& key) const { return !get(key).empty(); }

  std::string str(const std::string& key) const { return get(key); }
  std::uint64_t u64(const std::string& key) const;
  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  /// Comma-separated unsigned list; empty value gives an empty list.
  std::vector<std::size_t> sizes(const std::string& key) const;
  /// "1x28x28" style shape; empty value gives an empty shape.
  std::vector<std::size_t> shape(const std::string& key) const;

  /// Every key, sorted, one "key = value" line each.
  std::string resolved() const;
  const std::map<std::string, std::string>& values() const { return values_; }
  /// Keys assigned by parse() or set(), as opposed to defaults.
  const std::set<std::string>& explicit_keys() const { return explicit_; }
  /// Copies every explicitly assigned key of `other` into this config.
  void overlay(const RunConfig& other);

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

/// Table of keys, defaults and help text for --help output.
std::string schema_help();

}  // namespace rpgan::cli
