#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowdiag::acceptance {

// One gate of the release checklist. detail carries the measured extrema so a
// failing line says how far off it was.
struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs every criterion. Each is self-contained: fixed inputs, fixed seeds,
// tolerances pinned in the implementation.
std::vector<CriterionResult> run_all();

// Prints one PASS/FAIL line per criterion; returns true iff all passed.
bool print_table(std::ostream& os, const std::vector<CriterionResult>& results);

}  // namespace flowdiag::acceptance
