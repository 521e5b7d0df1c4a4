#include "flowdiag/quadratic_boson.hpp"

#include <algorithm>
#include <cmath>

#include "flowdiag/errors.hpp"

namespace flowdiag::quadratic {

void Params::validate() const {
  if (!std::isfinite(f0) || !std::isfinite(g0)) {
    throw ContractViolation("quadratic: parameters must be finite");
  }
  if (f0 <= 0.0) throw ContractViolation("quadratic: f0 must be positive");
  if (std::abs(g0) >= f0) {
    throw UnstableModeError("quadratic: |g0| >= f0 leaves no real mode energy");
  }
}

double quasiparticle_energy(const Params& p) {
  p.validate();
  return std::sqrt(p.f0 * p.f0 - p.g0 * p.g0);
}

double cut_generator_amplitude(const Params& p) {
  p.validate();
  return 0.5 * std::log((p.f0 + p.g0) / (p.f0 - p.g0));
}

std::array<double, 2> fe_closed_form(const Params& p, double l) {
  p.validate();
  if (p.g0 == 0.0) return {p.f0, 0.0};
  const double eps = quasiparticle_energy(p);
  // l0 places the hyperbolic profile so that f(0) = f0, g(0) = g0.
  const double l0 = 0.5 * std::log((p.f0 + eps) / (p.f0 - eps));
  const double x = eps * l + l0;
  const double f = eps / std::tanh(x);
  const double g = (p.g0 > 0.0 ? eps : -eps) / std::sinh(x);
  return {f, g};
}

std::array<double, 2> cut_closed_form(const Params& p, double theta) {
  const double G = cut_generator_amplitude(p);
  // The sum and difference f +- g decouple into plain exponentials.
  const double plus = (p.f0 + p.g0) * std::exp(-G * theta);
  const double minus = (p.f0 - p.g0) * std::exp(G * theta);
  return {0.5 * (plus + minus), 0.5 * (plus - minus)};
}

namespace {

std::vector<ScalarMonitor> invariant_monitor() {
  return {{"f2_minus_g2", [](std::span<const double> s) { return s[0] * s[0] - s[1] * s[1]; }}};
}

ScalarMonitor coupling_measure() {
  return {"abs_g", [](std::span<const double> s) { return std::abs(s[1]); }};
}

}  // namespace

FlowProblem fe_problem(const Params& p) {
  p.validate();
  FlowProblem prob;
  prob.dimension = 2;
  prob.rhs = [](double, std::span<const double> s, std::span<double> d) {
    d[0] = -s[1] * s[1];
    d[1] = -s[0] * s[1];
  };
  prob.monitors = invariant_monitor();
  prob.convergence_measure = coupling_measure();
  return prob;
}

FlowProblem cut_problem(const Params& p) {
  const double G = cut_generator_amplitude(p);
  FlowProblem prob;
  prob.dimension = 2;
  prob.rhs = [G](double, std::span<const double> s, std::span<double> d) {
    d[0] = -G * s[1];
    d[1] = -G * s[0];
  };
  prob.monitors = invariant_monitor();
  prob.convergence_measure = coupling_measure();
  return prob;
}

double default_fe_l_max(const Params& p) {
  const double eps = quasiparticle_energy(p);
  return std::clamp(50.0 / eps, 1.0, 1e5);
}

}  // namespace flowdiag::quadratic
