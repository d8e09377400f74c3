#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clubs {

// Minimal INI-style config: [section] headers, key = value lines, full-line
// comments starting with '#' or ';'. Keys are addressed as "section.key".
class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string s = trim(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                   ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty())
          throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                   ": empty section name");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": expected 'key = value'");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": empty key");
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw std::runtime_error("config: missing key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_long(const std::string& key) const { return to_long(key, get_string(key)); }
  long get_long(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
  }

  std::uint64_t get_u64(const std::string& key) const {
    return to_u64(key, get_string(key));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: key '" + key + "' is not a boolean: " + v);
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_list(get_string(key)))
      out.push_back(to_double(key, tok));
    return out;
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split_list(get_string(key)))
      out.push_back(to_u64(key, tok));
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& tok : split_list(get_string(key)))
      out.push_back(static_cast<int>(to_long(key, tok)));
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(s);
    while (std::getline(ss, tok, ',')) {
      const std::string t = trim(tok);
      if (!t.empty()) out.push_back(t);
    }
    if (out.empty())
      throw std::runtime_error("config: empty list value '" + s + "'");
    return out;
  }

  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not a number: " + v);
    }
  }

  static long to_long(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const long n = std::stol(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key + "' is not an integer: " + v);
    }
  }

  static std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const unsigned long long n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return static_cast<std::uint64_t>(n);
    } catch (const std::exception&) {
      throw std::runtime_error("config: key '" + key +
                               "' is not an unsigned integer: " + v);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace clubs
