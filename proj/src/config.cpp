#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nlpme {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

// strip a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool parse_double(const std::string& text, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(text, &used);
    return used == text.size();
  } catch (...) {
    return false;
  }
}

ConfigTree::Value parse_scalar(const std::string& raw, const std::string& origin,
                               const std::string& key) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError(origin + ": empty value for '" + key + "'");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      throw ConfigError(origin + ": unterminated string for '" + key + "'");
    return text.substr(1, text.size() - 2);
  }
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.front() == '[') {
    if (text.back() != ']')
      throw ConfigError(origin + ": unterminated array for '" + key + "'");
    std::vector<double> numbers;
    std::vector<std::string> strings;
    bool any_string = false;
    std::string inner = text.substr(1, text.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      if (item.front() == '"') {
        if (item.size() < 2 || item.back() != '"')
          throw ConfigError(origin + ": bad string array element for '" + key + "'");
        strings.push_back(item.substr(1, item.size() - 2));
        any_string = true;
      } else {
        double v = 0.0;
        if (!parse_double(item, v))
          throw ConfigError(origin + ": bad array element '" + item + "' for '" + key + "'");
        numbers.push_back(v);
      }
    }
    if (any_string) {
      if (!numbers.empty())
        throw ConfigError(origin + ": mixed array types for '" + key + "'");
      return strings;
    }
    return numbers;
  }
  double v = 0.0;
  if (!parse_double(text, v))
    throw ConfigError(origin + ": cannot parse value '" + text + "' for '" + key + "'");
  return v;
}

void flatten_json(const nlohmann::json& node, const std::string& prefix,
                  std::map<std::string, ConfigTree::Value>& out, const std::string& origin) {
  if (!node.is_object())
    throw ConfigError(origin + ": expected an object at '" + prefix + "'");
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_json(value, path, out, origin);
    } else if (value.is_boolean()) {
      out[path] = value.get<bool>();
    } else if (value.is_number()) {
      out[path] = value.get<double>();
    } else if (value.is_string()) {
      out[path] = value.get<std::string>();
    } else if (value.is_array()) {
      if (!value.empty() && value.front().is_string()) {
        std::vector<std::string> items;
        for (const auto& e : value) items.push_back(e.get<std::string>());
        out[path] = std::move(items);
      } else {
        std::vector<double> items;
        for (const auto& e : value) items.push_back(e.get<double>());
        out[path] = std::move(items);
      }
    } else {
      throw ConfigError(origin + ": unsupported JSON value at '" + path + "'");
    }
  }
}

} // namespace

ConfigTree ConfigTree::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return json ? parse_json(buffer.str(), path) : parse_toml(buffer.str(), path);
}

ConfigTree ConfigTree::parse_toml(const std::string& text, const std::string& origin) {
  ConfigTree tree;
  tree.origin_ = origin;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!key.empty() && key.front() == '"' && key.back() == '"')
      key = key.substr(1, key.size() - 2);
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    const std::string path = section.empty() ? key : section + "." + key;
    if (tree.values_.count(path))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + path + "'");
    tree.values_[path] = parse_scalar(line.substr(eq + 1), origin, path);
  }
  return tree;
}

ConfigTree ConfigTree::parse_json(const std::string& text, const std::string& origin) {
  ConfigTree tree;
  tree.origin_ = origin;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  flatten_json(doc, "", tree.values_, origin);
  return tree;
}

void ConfigTree::apply_overrides(const std::string& overrides) {
  std::stringstream ss(overrides);
  std::string item;
  while (std::getline(ss, item, '\n')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override: expected key=value, got '" + item + "'");
    const std::string key = trim(item.substr(0, eq));
    values_[key] = parse_scalar(item.substr(eq + 1), "<override>", key);
    consumed_.erase(key);
  }
}

const ConfigTree::Value* ConfigTree::fetch(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_[key] = true;
  return &it->second;
}

double ConfigTree::get_number(const std::string& key, double fallback) {
  const Value* v = fetch(key);
  if (!v) return fallback;
  if (const double* d = std::get_if<double>(v)) return *d;
  throw ConfigError(origin_ + ": '" + key + "' must be a number");
}

double ConfigTree::require_number(const std::string& key) {
  const Value* v = fetch(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  if (const double* d = std::get_if<double>(v)) return *d;
  throw ConfigError(origin_ + ": '" + key + "' must be a number");
}

int ConfigTree::get_int(const std::string& key, int fallback) {
  const double v = get_number(key, static_cast<double>(fallback));
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError(origin_ + ": '" + key + "' must be an integer");
  return i;
}

bool ConfigTree::get_bool(const std::string& key, bool fallback) {
  const Value* v = fetch(key);
  if (!v) return fallback;
  if (const bool* b = std::get_if<bool>(v)) return *b;
  throw ConfigError(origin_ + ": '" + key + "' must be a boolean");
}

std::string ConfigTree::get_string(const std::string& key, const std::string& fallback) {
  const Value* v = fetch(key);
  if (!v) return fallback;
  if (const std::string* s = std::get_if<std::string>(v)) return *s;
  throw ConfigError(origin_ + ": '" + key + "' must be a string");
}

std::vector<double> ConfigTree::get_numbers(const std::string& key,
                                            std::vector<double> fallback) {
  const Value* v = fetch(key);
  if (!v) return fallback;
  if (const auto* a = std::get_if<std::vector<double>>(v)) return *a;
  if (const double* d = std::get_if<double>(v)) return {*d};
  throw ConfigError(origin_ + ": '" + key + "' must be a numeric array");
}

void ConfigTree::reject_unconsumed() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty())
    throw ConfigError(origin_ + ": unknown configuration keys: " + unknown);
}

} // namespace nlpme
