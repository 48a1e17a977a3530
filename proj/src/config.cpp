#include "subtyper/config.hpp"

#include <fstream>
#include <sstream>

namespace subtyper {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
          c == '.' || c == '_' || c == '-'))
      return false;
  return true;
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "no such file or unreadable");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
    if (!cfg.values_.emplace(key, value).second)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
  }
  return cfg;
}

std::optional<std::string> Config::get(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_.insert(key);
  return it->second;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  auto v = get(key);
  return v ? *v : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    long long out = std::stoll(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + *v + "' is not an integer");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    unsigned long long out = std::stoull(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + *v + "' is not an unsigned integer");
  }
}

double Config::get_double(const std::string& key, double fallback) {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    double out = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + *v + "' is not a number");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(key + ": '" + *v + "' is not a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key) {
  auto v = get(key);
  std::vector<std::string> out;
  if (!v || v->empty()) return out;
  std::stringstream ss(*v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) throw ConfigError(key + ": empty list element");
    out.push_back(cell);
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) {
  std::vector<double> out;
  for (const auto& cell : get_list(key)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(cell, &pos));
      if (pos != cell.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + cell + "' is not a number");
    }
  }
  return out;
}

std::vector<std::string> Config::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values_)
    if (!consumed_.count(k)) out.push_back(k);
  return out;
}

void Config::require_all_consumed() const {
  const auto leftover = unconsumed();
  if (leftover.empty()) return;
  std::string msg = "unknown key(s):";
  for (const auto& k : leftover) msg += " '" + k + "'";
  throw ConfigError(origin_ + ": " + msg);
}

}  // namespace subtyper
