#pragma once

// Experiment harness: flat key=value configs, the built-in catalog of
// twin experiments (fig1..fig12 plus shortened variants of the two long
// runs), run dispatch with CSV/JSON persistence, and per-entry
// verification assertions.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nudgelab/diagnostics.hpp"

namespace nudgelab {

struct ExperimentConfig {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws naming the key
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int_or(const std::string& key, int fallback) const;
  void set(const std::string& key, const std::string& value);
};

// Parses `key = value` lines; '#' starts a comment, blank lines ignored.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_text(const ExperimentConfig& cfg);

// Full validation: known system, known keys, parseable values, CFL and
// timestep guards. Throws ValidationError naming the offending key.
void validate_config(const ExperimentConfig& cfg);

std::vector<std::string> catalog_names();
// Throws ValidationError listing valid names on an unknown name.
ExperimentConfig catalog_entry(const std::string& name);
bool catalog_entry_is_long(const std::string& name);

struct AssertionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct FitRecord {
  std::string channel;
  double rate = 0.0;
  double residual = 0.0;
  double window_t0 = 0.0;  // physical-time span of the fit window
  double window_t1 = 0.0;
};

struct RunRecord {
  ExperimentConfig config;
  std::string out_dir;
  std::vector<std::string> csv_paths;  // relative to out_dir
  std::map<std::string, double> scalars;
  std::vector<FitRecord> fits;
  std::vector<AssertionResult> assertions;
  double wall_seconds = 0.0;

  bool assertions_passed() const;
};

// Output root resolution: explicit argument > NUDGELAB_OUT > ./runs.
std::string default_output_root();

// Runs one experiment into <out_root>/<name>/, writes the config echo,
// CSV outputs and record.json, evaluates the entry's assertions, and
// returns the record.
RunRecord run(const ExperimentConfig& cfg, const std::string& out_root);

struct VerifyReport {
  std::string name;
  std::vector<AssertionResult> assertions;
  bool passed() const;
};

// Re-evaluates a completed run directory from its persisted outputs.
VerifyReport verify(const std::string& run_dir);

struct RunManyStatus {
  std::string name;
  bool ran = false;
  bool verified = false;
  std::string error;  // nonempty when the run threw
};

// Runs the listed entries (one worker thread each, at most `jobs`
// concurrent) into per-entry directories under out_root and verifies
// each on completion.
std::vector<RunManyStatus> run_many(const std::vector<std::string>& names,
                                    const std::string& out_root, int jobs);

}  // namespace nudgelab
