#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajcurr/numio.hpp"

namespace trajcurr {

/// Flat key=value text block. Lines starting with '#' and blank lines are
/// ignored; later assignments win.
class KeyValueConfig {
public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const { return parse_double(get(key)); }
  double get_double_or(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int_or(const std::string& key, long fallback) const;

  /// Comma-separated list of doubles.
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void set(const std::string& key, long value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, const std::vector<double>& values);

  std::string serialize() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

}  // namespace trajcurr
