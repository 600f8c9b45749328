#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpt/harness.hpp"

namespace fedpt::cli {

/// The config file could not be read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `key = value` entries with their source line (0 for command-line overrides).
struct ConfigEntries {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;
  std::filesystem::path source;
};

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are errors.
ConfigEntries parse_entries(const std::string& text, const std::filesystem::path& source = {});
ConfigEntries read_entries(const std::filesystem::path& path);

/// Applies "key=value" overrides on top of file entries.
void apply_overrides(ConfigEntries& entries, const std::vector<std::string>& overrides);

/// Builds and validates an experiment config. Unknown keys and malformed values raise
/// ConfigError with the key and line.
ExperimentConfig to_experiment_config(const ConfigEntries& entries);

ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {});

/// A sweep file names a base experiment file plus an axis block:
///   base = logistic_benchmark.cfg
///   axis = Y
///   values = 10, 5
/// Any other key overrides the base.
struct SweepSpec {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::Y;
  std::vector<double> values;
};

SweepSpec parse_sweep(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Keys accepted in experiment files.
const std::vector<std::string>& known_keys();

}  // namespace fedpt::cli
