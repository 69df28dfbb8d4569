#pragma once

// Experiment configuration, dispatch across the modules, and emission of
// CSV/JSON tables, two-column plot series and a manifest.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chflow::reports {

inline constexpr std::string_view kToolName = "chflow";
inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kEnvironmentPrefix = "CHFLOW_";

/// A rejected parameter. what() is a single line naming the key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& reason);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat key=value parameters; keys are lower case.
class ParameterSet {
 public:
  void set(std::string key, std::string value);
  /// Values of `other` replace existing ones.
  void merge(const ParameterSet& other);
  std::optional<std::string> find(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Lines of key=value; blank lines and lines starting with '#' are skipped.
  static ParameterSet from_text(std::string_view text);
  static ParameterSet from_file(const std::filesystem::path& path);
  /// Tokens of the forms key=value, --key=value and --key value.
  static ParameterSet from_tokens(const std::vector<std::string>& tokens);
  /// PREFIX_KEY=value entries of an environ-style array, with the key lower-cased.
  static ParameterSet from_environment(const char* const* environment, std::string_view prefix = kEnvironmentPrefix);

 private:
  std::map<std::string, std::string> values_;
};

enum class Format { Csv, Json };

struct ExperimentConfig {
  std::string experiment;
  std::string mode;
  std::map<std::string, std::string> parameters;  // every key the experiment reads, defaults filled in
  std::uint64_t seed = 1;
  Format format = Format::Csv;
  std::filesystem::path out;
};

struct ParameterInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::vector<std::string> modes;  // the first one is the default
  std::string help;
};

const std::vector<ExperimentInfo>& experiments();
/// Parameters read by one experiment mode, with their defaults.
std::vector<ParameterInfo> parameters(const std::string& experiment, const std::string& mode);

/// Resolves the experiment, the mode, the global keys (seed, format, out) and
/// every parameter. Throws ConfigError for unknown experiments, modes or keys
/// and for values outside their domains.
ExperimentConfig resolve(const std::string& experiment, const std::string& mode, const ParameterSet& params);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string to_csv() const;
  nlohmann::ordered_json to_json() const;
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  /// Two whitespace-separated columns, one point per line.
  std::string to_text() const;
};

struct Report {
  std::vector<Table> tables;
  std::vector<Series> series;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

Report run(const ExperimentConfig& config);

/// Writes the tables, series, summary.json and manifest.json into config.out
/// and returns the file names in manifest order.
std::vector<std::string> write_artifacts(const ExperimentConfig& config, const Report& report);

/// Shortest round-trip decimal form.
std::string format_number(double value);

}  // namespace chflow::reports
