#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gestboot {

// Flat `key = value` text config with `#` comments. Values keep internal
// whitespace (paths); keys are unique. The canonical form is sorted, which
// makes snapshots diff-friendly and byte-reproducible.
class Config {
 public:
  Config() = default;

  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  // Required getters throw ConfigError naming the offending key.
  std::string get_string(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // true/false/1/0
  std::uint64_t get_u64(const std::string& key) const;

  // Defaulted getters fall back when the key is absent (but still throw on
  // malformed values, so typos fail loudly).
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  // Sorted `key = value` lines; parsing the result reproduces the config.
  std::string canonical() const;

  // Keys whose values differ between the two configs (including keys present
  // on only one side), sorted.
  std::vector<std::string> diff_keys(const Config& other) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Applies the GESTBOOT_SEED environment override to the `seed` key, if set.
void apply_env_seed_override(Config* cfg);

}  // namespace gestboot
