#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kpz {

enum class Experiment { constants, brunet, simulate, mixing, reversal, jointlaw, clt };

const char* experiment_name(Experiment e);
bool parse_experiment(const std::string& s, Experiment* out);

// Raised for malformed or out-of-range configuration input; the message names
// the offending key and line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runtime settings for one run.  Zero means "experiment default" for dt,
// t_steps, n_disorder and s_step; the *_or_default accessors resolve them.
struct ExperimentConfig {
  Experiment experiment = Experiment::constants;
  std::vector<double> beta{1.0};

  // lattice.*
  int n_sites = 64;
  double dt = 0.0;     // default 1/n_sites; jointlaw uses 1/(2 n_sites^2)
  int t_steps = 0;     // default: 8 time units
  int n_disorder = 0;  // default per experiment (see n_disorder_or_default)

  // mc.*
  long long n_outer = 100000;
  int n_grid = 1024;
  int n_thermal = 2;  // endpoint draws per disorder realization (clt)

  // diag.*
  std::vector<double> probes{0.25, 0.5, 0.75};
  int n_permutations = 999;
  int s_step = 0;      // reversal probe step; default t_steps/2
  bool stationary = true;  // reversal start law; false = flat negative control
  double t_max = 4.0;  // mixing horizon in time units

  // brunet.*
  double h = 0.05;

  uint64_t seed = 0;
  int workers = 0;  // 0 = available_workers()
  std::string output_dir = ".";

  double dt_or_default() const;
  int steps_per_unit() const;  // 1/dt as an exact integer
  int t_steps_or_default() const;
  int n_disorder_or_default() const;
  int s_step_or_default() const;
};

// Line-oriented `key=value` text with dotted section keys and '#' comments.
// Unknown keys, type mismatches and out-of-range values raise ConfigError
// naming the key and 1-based line.
ExperimentConfig parse_config(const std::string& text);

// One `--set key=value` override; `slot` labels the error location.  Range
// checks apply per key; call validate() once after the last override.
void apply_override(ExperimentConfig& cfg, const std::string& kv, int slot);

// Post-parse cross-field validation (also called by parse_config).
void validate(const ExperimentConfig& cfg);

}  // namespace kpz
