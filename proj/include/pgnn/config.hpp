#ifndef PGNN_CONFIG_HPP
#define PGNN_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgnn {

// Sectioned key-value run configuration:
//
//   [scenario]
//   antennas = 8
//   users = 4
//   snr_db = 10
//   ...
//
// '#' starts a comment; keys live under the most recent [section] header.

class config_parse_error : public std::runtime_error {
 public:
  config_parse_error(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
  int line_number;
};

class Config {
 public:
  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse(buf.str());
  }

  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const std::string t = strip(line.substr(0, line.find('#')));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw config_parse_error("unterminated section header", line_no);
        section = strip(t.substr(1, t.size() - 2));
        if (section.empty()) throw config_parse_error("empty section name", line_no);
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw config_parse_error("expected key = value", line_no);
      const std::string key = strip(t.substr(0, eq));
      const std::string value = strip(t.substr(eq + 1));
      if (key.empty()) throw config_parse_error("empty key", line_no);
      if (section.empty()) throw config_parse_error("key outside of any [section]", line_no);
      cfg.values_[section + "." + key] = value;
      cfg.lines_[section + "." + key] = line_no;
    }
    return cfg;
  }

  bool has(const std::string& dotted) const { return values_.count(dotted) > 0; }

  std::string get_string(const std::string& dotted) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) throw std::runtime_error("config: missing required field '" + dotted + "'");
    return it->second;
  }
  std::string get_string(const std::string& dotted, const std::string& fallback) const {
    const auto it = values_.find(dotted);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& dotted) const { return to_double(dotted, get_string(dotted)); }
  double get_double(const std::string& dotted, double fallback) const {
    return has(dotted) ? get_double(dotted) : fallback;
  }

  std::int64_t get_int(const std::string& dotted) const { return to_int(dotted, get_string(dotted)); }
  std::int64_t get_int(const std::string& dotted, std::int64_t fallback) const {
    return has(dotted) ? get_int(dotted) : fallback;
  }

  // comma-separated integers, e.g. "32, 32, 8"
  std::vector<std::int64_t> get_int_list(const std::string& dotted) const {
    std::vector<std::int64_t> out;
    std::istringstream is(get_string(dotted));
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(to_int(dotted, strip(item)));
    return out;
  }
  std::vector<std::int64_t> get_int_list(const std::string& dotted,
                                         std::vector<std::int64_t> fallback) const {
    return has(dotted) ? get_int_list(dotted) : std::move(fallback);
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  int line_of(const std::string& dotted) const {
    const auto it = lines_.find(dotted);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;

  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  double to_double(const std::string& field, const std::string& s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw config_parse_error("field '" + field + "' is not a number: '" + s + "'", line_of(field));
    }
  }

  std::int64_t to_int(const std::string& field, const std::string& s) const {
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(s, &used, 10);
      if (used != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw config_parse_error("field '" + field + "' is not an integer: '" + s + "'", line_of(field));
    }
  }
};

}  // namespace pgnn

#endif
