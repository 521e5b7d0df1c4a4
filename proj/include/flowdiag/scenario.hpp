#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace flowdiag::scenario {

// Outcome of a single scenario run. The report and trajectory text are fully
// deterministic: identical scenario text and seed give identical bytes.
struct RunArtifacts {
  std::string report;          // JSON summary
  std::string trajectory_csv;  // header plus one row per sample point
  std::string report_path;     // requested output paths; empty means stdout only
  std::string csv_path;
  bool model_error = false;       // a run block holds a typed error record
  bool residual_failure = false;  // a conserved quantity drifted past its ceiling
};

// Parses and runs one scenario. Throws IoError on malformed JSON and
// ValidationError (with the offending key) on schema violations.
// Physics-level rejections do not throw: the failed method's run block gets a
// typed error record and model_error is set, while other methods still
// produce numbers.
RunArtifacts run_scenario_text(std::string_view text);

struct SweepArtifacts {
  std::string csv;  // swept-key columns plus per-model summary columns
  std::string csv_path;
  std::size_t points = 0;
};

// Expands array-valued numeric parameters into a cartesian grid (at most
// 10000 points, lexicographic in sorted key order) and evaluates a summary
// per point. The threaded variant writes each row into its own slot, so its
// output is byte identical to the serial one.
SweepArtifacts sweep_scenario_text(std::string_view text);
SweepArtifacts sweep_scenario_text_serial(std::string_view text);

}  // namespace flowdiag::scenario
