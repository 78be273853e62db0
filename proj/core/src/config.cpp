#include "gestboot/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gestboot/error.hpp"

namespace gestboot {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key `" + key + "`");
    cfg.entries_[key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

void Config::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) throw ConfigError("config: empty key in set()");
  entries_[trim(key)] = trim(value);
}

std::string Config::get_string(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("config: missing required key `" + key + "`");
  return it->second;
}

long long Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key `" + key + "` is not an integer: `" + v + "`");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key `" + key + "` is not a number: `" + v + "`");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key `" + key + "` is not a bool (true/false/1/0): `" + v + "`");
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(r);
  } catch (const std::exception&) {
    throw ConfigError("config: key `" + key + "` is not a non-negative integer: `" + v + "`");
  }
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}
long long Config::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}
double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}
bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}
std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

std::string Config::canonical() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
  return out.str();
}

std::vector<std::string> Config::diff_keys(const Config& other) const {
  std::vector<std::string> keys;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      keys.push_back(a->first);
      ++a;
    } else if (a == entries_.end() || b->first < a->first) {
      keys.push_back(b->first);
      ++b;
    } else {
      if (a->second != b->second) keys.push_back(a->first);
      ++a;
      ++b;
    }
  }
  return keys;
}

void apply_env_seed_override(Config* cfg) {
  const char* env = std::getenv("GESTBOOT_SEED");
  if (env == nullptr || *env == '\0') return;
  const std::string v(env);
  try {
    std::size_t pos = 0;
    (void)std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("GESTBOOT_SEED is not a non-negative integer: `" + v + "`");
  }
  cfg->set("seed", v);
}

}  // namespace gestboot
