#pragma once

#include <map>
#include <string>
#include <vector>

#include "dts/errors.hpp"
#include "dts/types.hpp"

namespace dts {

// Sectioned key-value config: [section] headers, key = value lines, # or ;
// comments. Values may be wrapped in matching single or double quotes.
class ConfigMap {
 public:
  using Section = std::map<std::string, std::string>;

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::string require(const std::string& section, const std::string& key) const;
  Real get_real(const std::string& section, const std::string& key, Real fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  // Comma-separated list; empty vector when the key is absent.
  std::vector<Real> get_real_list(const std::string& section, const std::string& key) const;

  const std::map<std::string, Section>& sections() const { return sections_; }

 private:
  std::map<std::string, Section> sections_;
};

ConfigMap parse_ini_text(const std::string& text);
ConfigMap load_ini(const std::string& path);
// Sorted sections and keys, so re-serialization is deterministic.
std::string serialize_ini(const ConfigMap& map);
// Applies one "section.key=value" override.
void apply_override(ConfigMap& map, const std::string& spec);

// Whole-string numeric parsing; throws ValidationError on leftovers.
Real parse_real(const std::string& text);
long long parse_int(const std::string& text);
std::vector<Real> parse_real_list(const std::string& text);

}  // namespace dts
