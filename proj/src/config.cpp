#include "movin/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace movin {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

Config Config::fromFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fromString(buf.str());
}

Config Config::fromString(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineNo) + " has no '=': " + stripped);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ValidationError("config line " + std::to_string(lineNo) + " has empty key");
    cfg.entries_[key] = value;
  }
  return cfg;
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

double Config::getDouble(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "' is not a number: " + it->second);
  }
}

int Config::getInt(const std::string& key, int fallback) const {
  const double v = getDouble(key, fallback);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ValidationError("config key '" + key + "' is not an integer");
  return i;
}

bool Config::getBool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key '" + key + "' is not a boolean: " + it->second);
}

std::string Config::getString(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

Vec3 Config::getVec3(const std::string& key, const Vec3& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::istringstream in(it->second);
  Vec3 v;
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, part, ','))
      throw ValidationError("config key '" + key + "' needs three comma-separated numbers");
    try {
      v[i] = std::stod(trim(part));
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "' component is not a number: " + part);
    }
  }
  if (std::getline(in, part, ','))
    throw ValidationError("config key '" + key + "' has more than three components");
  return v;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void Config::requireKnownKeys(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown config key: " + key);
  }
}

}  // namespace movin
