#pragma once
#include <string>
#include <utility>
#include <vector>

#include "kpz/config.hpp"

namespace kpz {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct RunResult {
  bool all_pass = true;
  std::vector<std::pair<std::string, bool>> flags;  // evaluation order
  std::vector<std::string> files;  // CSV tables written, in output order
  std::string manifest_path;
};

// Runs the selected experiment, writes one CSV per result table plus a JSON
// manifest into cfg.output_dir (all atomically), and evaluates the
// experiment's pass/fail flags.  Partial outputs are removed if the run
// throws.  The CSV contents are a pure function of (config, seed); worker
// count only changes wall time.
RunResult run(const ExperimentConfig& cfg);

}  // namespace kpz
