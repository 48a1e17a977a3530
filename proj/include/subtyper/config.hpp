#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "subtyper/error.hpp"

namespace subtyper {

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

// Flat `key = value` configuration with '#' comments. Keys are dotted
// lowercase identifiers. Every key must be consumed by a resolver; leftovers
// are reported as unknown keys, because a silently ignored typo in a
// hyperparameter is worse than an error.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);
  static Config parse(const std::string& text, const std::string& origin = "<memory>");

  std::optional<std::string> get(const std::string& key);  // marks key consumed
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Typed accessors; throw ConfigError with the key name on bad values.
  std::string get_string(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key, long long fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<std::string> get_list(const std::string& key);  // comma-separated
  std::vector<double> get_double_list(const std::string& key);

  std::vector<std::string> unconsumed() const;
  void require_all_consumed() const;  // throws ConfigError listing unknown keys

  const std::map<std::string, std::string>& all() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string origin_;
};

}  // namespace subtyper
