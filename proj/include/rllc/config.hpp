#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rllc {

/// Bad command/config input; mapped to exit code 2 by the CLI.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One experiment section of a config file: a named, ordered set of
/// key = value pairs. Keys are kept sorted so serialization is canonical and
/// serialize(parse(text)) is idempotent.
struct ExperimentConfig {
  std::string name;
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  std::vector<double> get_doubles(const std::string& key) const;    // empty if absent
  std::vector<int> get_ints(const std::string& key) const;          // empty if absent
  std::vector<std::uint64_t> get_u64s(const std::string& key) const;
};

/// Parses the flat sectioned key-value format:
///   # comment
///   [experiment-name]
///   key = value
/// Reports line numbers on errors.
std::vector<ExperimentConfig> parse_config_text(const std::string& text);

std::vector<ExperimentConfig> load_config_file(const std::string& path);

std::string serialize_config(const std::vector<ExperimentConfig>& configs);

/// FNV-1a hash of one section's canonical serialization, as fixed-width hex.
std::string config_hash(const ExperimentConfig& config);

}  // namespace rllc
