#pragma once

#include <string>
#include <utility>
#include <vector>

#include "microstab/types.hpp"

namespace microstab {

/// Declarative key-value configuration with named sections:
///
///   [section]
///   key = value        # comment
///
/// Entries before any header belong to the unnamed section "". Repeated
/// section headers append to the same section. parse(serialize(c)) == c.
class Config {
 public:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  static Config parse(const std::string& text);
  static Config load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;

  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  long get_int(const std::string& section, const std::string& key) const;
  long get_int_or(const std::string& section, const std::string& key,
                  long fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key,
                   bool fallback) const;
  std::vector<double> get_list(const std::string& section,
                               const std::string& key) const;

  void set(const std::string& section, const std::string& key,
           const std::string& value);
  void set_double(const std::string& section, const std::string& key,
                  double value);  // 17 significant digits

  const std::vector<Section>& sections() const { return sections_; }
  std::vector<std::string> section_names(const std::string& prefix = "") const;

  bool operator==(const Config& other) const {
    if (sections_.size() != other.sections_.size()) return false;
    for (size_t i = 0; i < sections_.size(); ++i)
      if (sections_[i].name != other.sections_[i].name ||
          sections_[i].entries != other.sections_[i].entries)
        return false;
    return true;
  }

 private:
  const std::string* find(const std::string& section,
                          const std::string& key) const;
  std::vector<Section> sections_;
};

/// 17-significant-digit decimal form that round-trips a double exactly.
std::string format_full(double v);

}  // namespace microstab
