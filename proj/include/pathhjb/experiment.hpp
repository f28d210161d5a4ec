#pragma once

// Experiment runner: flat dotted key=value configuration, CSV tables, the
// per-command suites and the JSON manifest with content hashes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathhjb {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class KeyType { Uint, Real, String, Reals, Uints, Strings };

struct ConfigKey {
  std::string key;
  KeyType type;
  std::string def;
  std::string doc;
};

const std::vector<ConfigKey>& config_schema();
/// Text of config/schema.cfg: every key with type, default and description.
std::string schema_text();

class RunConfig {
 public:
  static RunConfig defaults();
  /// Lines "key = value"; '#' starts a comment; "[section]" prefixes following keys.
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  /// A .json path is read as a manifest and its config echo is used.
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t uint(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::size_t> uints(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return v_; }
  std::string dump() const;

  /// Cross-field checks; throws ConfigError listing every failing field path.
  void validate() const;

 private:
  std::map<std::string, std::string> v_;
};

/// Rendered table; numbers use 17 significant digits.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Table() = default;
  explicit Table(std::vector<std::string> h) : header(std::move(h)) {}
  void add(std::vector<std::string> row);
};

std::string fmt_real(double x);
std::string fmt_uint(std::size_t x);
void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);
Table parse_csv(const std::string& text);
std::string to_csv(const Table& t);

/// Long format (x, y, series): one row per numeric cell outside the x column.
/// The x column is `x_col`, else a column named "x", else the first one. Text
/// columns label the series as "<text>/<column>".
Table plotdata(const Table& study, const std::string& x_col = "");

std::string sha256_hex(const std::string& bytes);

struct Check {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  std::string relation;  // "<=", ">=", "==", "in"
  bool passed = false;
};

struct SuiteOutput {
  std::string suite;
  std::vector<Check> checks;
  std::map<std::string, Table> tables;  // file name -> table
  double seconds = 0.0;
  bool passed() const;
};

std::vector<std::string> command_names();
/// Suites run by a command ("all" runs every suite).
std::vector<std::string> command_suites(const std::string& command);

SuiteOutput run_suite(const std::string& suite, const RunConfig& cfg);

struct RunResult {
  std::string command;
  std::vector<SuiteOutput> suites;
  std::map<std::string, std::string> files;  // name -> sha256
  bool passed() const;
};

/// Validates the config, runs the command's suites, writes CSVs and manifest.json into `out`.
RunResult run_command(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out);

std::string artifact_version();

}  // namespace pathhjb
