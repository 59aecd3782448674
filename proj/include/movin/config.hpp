#pragma once

#include <map>
#include <string>
#include <vector>

#include "movin/common.hpp"

namespace movin {

/// Flat `key = value` configuration file. Lines starting with '#' (or blank)
/// are ignored; keys are dotted lowercase paths, e.g. `sensor.h_fov = 120`.
class Config {
 public:
  Config() = default;

  static Config fromFile(const std::string& path);
  static Config fromString(const std::string& text);

  bool has(const std::string& key) const;
  double getDouble(const std::string& key, double fallback) const;
  int getInt(const std::string& key, int fallback) const;
  bool getBool(const std::string& key, bool fallback) const;
  std::string getString(const std::string& key, const std::string& fallback) const;
  /// Comma-separated triple, e.g. `sensor.position = 0, 1.0, 0`.
  Vec3 getVec3(const std::string& key, const Vec3& fallback) const;

  void set(const std::string& key, const std::string& value);

  /// Throws ValidationError naming the first key not in `known`.
  void requireKnownKeys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace movin
