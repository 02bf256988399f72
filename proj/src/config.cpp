#include "rllc/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rllc {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

double parse_double(const std::string& value, const std::string& key) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw UsageError("config key '" + key + "': '" + value + "' is not a number");
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, const std::string& key, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(item, key));
  }
  return out;
}

}  // namespace

std::string ExperimentConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::string ExperimentConfig::require(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw UsageError("experiment '" + name + "': missing required key '" + key + "'");
  }
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_double(it->second, key);
}

double ExperimentConfig::require_double(const std::string& key) const {
  return parse_double(require(key), key);
}

int ExperimentConfig::get_int(const std::string& key, int fallback) const {
  const double value = get_double(key, fallback);
  const int out = static_cast<int>(value);
  if (value != out) throw UsageError("config key '" + key + "' must be an integer");
  return out;
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  char* end = nullptr;
  const unsigned long long out = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw UsageError("config key '" + key + "': '" + it->second + "' is not an unsigned integer");
  }
  return out;
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) return {};
  return parse_list<double>(it->second, key, parse_double);
}

std::vector<int> ExperimentConfig::get_ints(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) return {};
  return parse_list<int>(it->second, key, [](const std::string& item, const std::string& k) {
    const double value = parse_double(item, k);
    const int out = static_cast<int>(value);
    if (value != out) throw UsageError("config key '" + k + "' must list integers");
    return out;
  });
}

std::vector<std::uint64_t> ExperimentConfig::get_u64s(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) return {};
  return parse_list<std::uint64_t>(it->second, key,
                                   [](const std::string& item, const std::string& k) {
                                     char* end = nullptr;
                                     const auto out = std::strtoull(item.c_str(), &end, 10);
                                     if (end == item.c_str() || *end != '\0') {
                                       throw UsageError("config key '" + k +
                                                        "' must list unsigned integers");
                                     }
                                     return static_cast<std::uint64_t>(out);
                                   });
}

std::vector<ExperimentConfig> parse_config_text(const std::string& text) {
  std::vector<ExperimentConfig> configs;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw UsageError("config line " + std::to_string(line_no) + ": unterminated section header");
      }
      ExperimentConfig config;
      config.name = trim(line.substr(1, line.size() - 2));
      if (config.name.empty()) {
        throw UsageError("config line " + std::to_string(line_no) + ": empty section name");
      }
      configs.push_back(std::move(config));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    if (configs.empty()) {
      throw UsageError("config line " + std::to_string(line_no) +
                       ": key outside of a [section]");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    }
    configs.back().kv[key] = value;
  }
  return configs;
}

std::vector<ExperimentConfig> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string serialize_config(const std::vector<ExperimentConfig>& configs) {
  std::string out;
  for (const auto& config : configs) {
    out += "[" + config.name + "]\n";
    for (const auto& [key, value] : config.kv) {
      out += key + " = " + value + "\n";
    }
    out += "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string canon = serialize_config({config});
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rllc
