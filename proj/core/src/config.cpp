#include "microstab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace microstab {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Config Config::parse(const std::string& text) {
  Config c;
  c.sections_.push_back({"", {}});
  Section* cur = &c.sections_.front();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      cur = nullptr;
      for (Section& s : c.sections_)
        if (s.name == name) cur = &s;
      if (!cur) {
        c.sections_.push_back({name, {}});
        cur = &c.sections_.back();
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    cur->entries.emplace_back(key, value);
  }
  if (c.sections_.front().name.empty() && c.sections_.front().entries.empty() &&
      c.sections_.size() > 1)
    c.sections_.erase(c.sections_.begin());
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Config::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const Section& s : sections_) {
    if (!s.name.empty() || !first) {
      if (!first) out << "\n";
      out << "[" << s.name << "]\n";
    }
    for (const auto& [k, v] : s.entries) out << k << " = " << v << "\n";
    first = false;
  }
  return out.str();
}

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << serialize();
}

bool Config::has_section(const std::string& section) const {
  for (const Section& s : sections_)
    if (s.name == section) return true;
  return false;
}

const std::string* Config::find(const std::string& section,
                                const std::string& key) const {
  for (const Section& s : sections_)
    if (s.name == section)
      for (const auto& [k, v] : s.entries)
        if (k == key) return &v;
  return nullptr;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

std::string Config::get(const std::string& section,
                        const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v)
    throw ConfigError("missing config key [" + section + "] " + key);
  return *v;
}

std::string Config::get_or(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v ? *v : fallback;
}

double Config::get_double(const std::string& section,
                          const std::string& key) const {
  const std::string v = get(section, key);
  // strtod instead of stod: subnormal values set ERANGE but are still exact
  const char* begin = v.c_str();
  char* end = nullptr;
  double d = std::strtod(begin, &end);
  size_t pos = static_cast<size_t>(end - begin);
  if (pos == 0 || !std::isfinite(d)) {
    throw ConfigError("[" + section + "] " + key + ": not a number: " + v);
  }
  if (trim(v.substr(pos)) != "")
    throw ConfigError("[" + section + "] " + key + ": trailing text: " + v);
  return d;
}

double Config::get_double_or(const std::string& section, const std::string& key,
                             double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string v = get(section, key);
  size_t pos = 0;
  long n;
  try {
    n = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": not an integer: " + v);
  }
  if (trim(v.substr(pos)) != "")
    throw ConfigError("[" + section + "] " + key + ": trailing text: " + v);
  return n;
}

long Config::get_int_or(const std::string& section, const std::string& key,
                        long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

bool Config::get_bool_or(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("[" + section + "] " + key + ": not a boolean: " + v);
}

std::vector<double> Config::get_list(const std::string& section,
                                     const std::string& key) const {
  std::istringstream in(get(section, key));
  std::vector<double> out;
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("[" + section + "] " + key + ": bad list item: " + tok);
    }
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  for (Section& s : sections_)
    if (s.name == section) {
      for (auto& [k, v] : s.entries)
        if (k == key) {
          v = value;
          return;
        }
      s.entries.emplace_back(key, value);
      return;
    }
  sections_.push_back({section, {{key, value}}});
}

void Config::set_double(const std::string& section, const std::string& key,
                        double value) {
  set(section, key, format_full(value));
}

std::vector<std::string> Config::section_names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const Section& s : sections_)
    if (s.name.rfind(prefix, 0) == 0) out.push_back(s.name);
  return out;
}

}  // namespace microstab
