#include "dts/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dts {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

bool ConfigMap::has(const std::string& section, const std::string& key) const {
  const auto sec = sections_.find(section);
  return sec != sections_.end() && sec->second.count(key) > 0;
}

void ConfigMap::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

std::string ConfigMap::get(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  const auto sec = sections_.find(section);
  if (sec == sections_.end()) return fallback;
  const auto it = sec->second.find(key);
  return it == sec->second.end() ? fallback : it->second;
}

std::string ConfigMap::require(const std::string& section, const std::string& key) const {
  if (!has(section, key))
    throw ValidationError("missing config key " + section + "." + key);
  return sections_.at(section).at(key);
}

Real ConfigMap::get_real(const std::string& section, const std::string& key, Real fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return parse_real(sections_.at(section).at(key));
  } catch (const ValidationError&) {
    throw ValidationError("config key " + section + "." + key + " is not a number");
  }
}

long long ConfigMap::get_int(const std::string& section, const std::string& key,
                             long long fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return parse_int(sections_.at(section).at(key));
  } catch (const ValidationError&) {
    throw ValidationError("config key " + section + "." + key + " is not an integer");
  }
}

bool ConfigMap::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = sections_.at(section).at(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key " + section + "." + key + " is not a boolean");
}

std::vector<Real> ConfigMap::get_real_list(const std::string& section,
                                           const std::string& key) const {
  if (!has(section, key)) return {};
  try {
    return parse_real_list(sections_.at(section).at(key));
  } catch (const ValidationError&) {
    throw ValidationError("config key " + section + "." + key + " is not a number list");
  }
}

ConfigMap parse_ini_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw ValidationError("malformed section header at line " + std::to_string(line_no));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("expected key=value at line " + std::to_string(line_no));
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ValidationError("empty key at line " + std::to_string(line_no));
    if (section.empty())
      throw ValidationError("key outside any [section] at line " + std::to_string(line_no));
    map.set(section, key, unquote(trim(t.substr(eq + 1))));
  }
  return map;
}

ConfigMap load_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_ini_text(buffer.str());
}

std::string serialize_ini(const ConfigMap& map) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : map.sections()) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << '\n';
  }
  return out.str();
}

void apply_override(ConfigMap& map, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw ValidationError("override must look like section.key=value: " + spec);
  const std::string target = trim(spec.substr(0, eq));
  const std::size_t dot = target.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= target.size())
    throw ValidationError("override must look like section.key=value: " + spec);
  map.set(target.substr(0, dot), target.substr(dot + 1), unquote(trim(spec.substr(eq + 1))));
}

Real parse_real(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ValidationError("empty number");
  char* end = nullptr;
  const Real v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) throw ValidationError("not a number: " + text);
  return v;
}

long long parse_int(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ValidationError("empty integer");
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size()) throw ValidationError("not an integer: " + text);
  return v;
}

std::vector<Real> parse_real_list(const std::string& text) {
  std::vector<Real> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) values.push_back(parse_real(item));
  if (values.empty()) throw ValidationError("empty number list");
  return values;
}

}  // namespace dts
