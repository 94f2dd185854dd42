#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace nlpme {

/// Malformed or inconsistent configuration input. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> scalar/array view of a parsed config file.
/// Accepts a TOML subset (sections, scalars, flat arrays, # comments) or a
/// JSON object of objects; the format is chosen by extension.
class ConfigTree {
public:
  using Value = std::variant<bool, double, std::string, std::vector<double>,
                             std::vector<std::string>>;

  static ConfigTree parse_file(const std::string& path);
  static ConfigTree parse_toml(const std::string& text, const std::string& origin = "<toml>");
  static ConfigTree parse_json(const std::string& text, const std::string& origin = "<json>");

  /// Apply "section.key=value" overrides (newline- or comma-separated
  /// assignments; values parsed like TOML scalars).
  void apply_overrides(const std::string& overrides);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double get_number(const std::string& key, double fallback);
  double require_number(const std::string& key);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  std::vector<double> get_numbers(const std::string& key, std::vector<double> fallback);

  /// Every key must have been consumed by one of the getters; silent typos
  /// in scientific parameters are hard errors.
  void reject_unconsumed() const;

  const std::map<std::string, Value>& values() const { return values_; }

private:
  const Value* fetch(const std::string& key);
  std::map<std::string, Value> values_;
  std::map<std::string, bool> consumed_;
  std::string origin_;
};

} // namespace nlpme
