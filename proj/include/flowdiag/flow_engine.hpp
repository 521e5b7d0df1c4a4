#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flowdiag {

// Derivative evaluator for a flow dx/dl = F(l, x) on a real coefficient
// vector. Writes F(l, state) into `deriv` (same length as `state`).
using RhsFn =
    std::function<void(double l, std::span<const double> state, std::span<double> deriv)>;

// Pure scalar functional of the state, tracked along the flow.
using ScalarFn = std::function<double(std::span<const double> state)>;

struct ScalarMonitor {
  std::string name;
  ScalarFn eval;
};

// A first-order flow on a real coefficient vector. Complex amplitudes are
// stored as interleaved (real, imaginary) pairs so one integrator serves
// every model.
struct FlowProblem {
  std::size_t dimension = 0;
  RhsFn rhs;
  std::vector<ScalarMonitor> monitors;
  // When present, the flow terminates as converged at the first accepted
  // step where this measure falls below IntegratorConfig::convergence_threshold.
  std::optional<ScalarMonitor> convergence_measure;
};

enum class StepMethod {
  FixedRk4,      // classical 4th-order Runge-Kutta, constant step
  AdaptiveRk45,  // embedded Cash-Karp 4(5) pair, adaptive step
};

enum class Termination { Converged, ReachedLMax, StepLimit, NumericalFailure };

const char* to_string(Termination t);
const char* to_string(StepMethod m);

// Integration policy.
//
// The adaptive controller is the textbook embedded 4(5) one with the exact
// constants:   new_step = 0.9 * step * (1/err)^(1/5),  clamped to
// [0.2, 5] x previous step, where err is the scaled RMS error
//   err = sqrt(mean((e_i / (abs_tol + rel_tol*max(|x_i|,|x'_i|)))^2))
// and a step is accepted when err <= 1.
struct IntegratorConfig {
  StepMethod method = StepMethod::AdaptiveRk45;
  double abs_tol = 1e-12;  // adaptive only
  double rel_tol = 1e-10;  // adaptive only
  double step = 1e-3;      // fixed-step size
  double l_max = 1.0;
  double convergence_threshold = 0.0;
  std::size_t max_steps = 1'000'000;  // counts attempted (accepted+rejected) steps
  std::size_t sample_stride = 1;      // record every k-th accepted step

  // Throws ContractViolation when a field is out of range.
  void validate() const;
};

struct TrajectorySample {
  double l = 0.0;
  std::vector<double> state;
  std::vector<double> derivative;  // rhs at (l, state); consumed by resampling
  std::vector<double> monitors;    // one value per FlowProblem::monitors entry
};

struct FlowResult {
  double final_l = 0.0;
  std::vector<double> final_state;
  std::vector<TrajectorySample> trajectory;  // l strictly increasing; last == final
  Termination termination = Termination::ReachedLMax;
};

// Integrates the flow from l = 0 with the given initial state. The initial
// point is always the first trajectory sample; the point of termination is
// always the last. Non-finite rhs output terminates with
// Termination::NumericalFailure instead of throwing.
FlowResult integrate_flow(const FlowProblem& problem, const IntegratorConfig& config,
                          std::span<const double> initial);

// States at the requested flow-parameter values, by cubic Hermite
// interpolation on the stored (state, derivative) samples. Sample points are
// reproduced exactly. l_points must be nondecreasing and inside
// [trajectory front, final_l]; out-of-range values throw std::out_of_range.
std::vector<std::vector<double>> resample_trajectory(const FlowResult& result,
                                                     std::span<const double> l_points);

}  // namespace flowdiag
