#include "flowdiag/electron_phonon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowdiag/errors.hpp"

namespace flowdiag::electron_phonon {

void Params::validate() const {
  if (!std::isfinite(omega) || !std::isfinite(delta) || !std::isfinite(m0) ||
      !std::isfinite(v0)) {
    throw ContractViolation("electron_phonon: parameters must be finite");
  }
  if (omega < 0.0) throw ContractViolation("electron_phonon: omega must be non-negative");
  if (omega == 0.0 && delta == 0.0) {
    throw DegenerateChannelError("electron_phonon: omega and delta both vanish");
  }
}

std::array<double, 2> channel_energies(const Params& p) {
  p.validate();
  return {p.omega + p.delta, p.omega - p.delta};
}

bool cut_resonant(const Params& p) {
  const std::array<double, 2> a = channel_energies(p);
  return a[0] == 0.0 || a[1] == 0.0;
}

std::array<double, 2> cut_generator(const Params& p) {
  if (cut_resonant(p)) {
    throw ResonanceError("electron_phonon: channel energy vanishes, generator undefined");
  }
  const std::array<double, 2> a = channel_energies(p);
  return {p.m0 / a[0], p.m0 / a[1]};
}

std::array<double, 3> fe_closed_form(const Params& p, double l) {
  const std::array<double, 2> a = channel_energies(p);
  const double m1 = p.m0 * std::exp(-a[0] * a[0] * l);
  const double m2 = p.m0 * std::exp(-a[1] * a[1] * l);
  // alpha1^2 + alpha2^2 = 2 (omega^2 + delta^2), positive after validation.
  const double rate = a[0] * a[0] + a[1] * a[1];
  const double v = p.v0 - (a[0] + a[1]) * p.m0 * p.m0 * (1.0 - std::exp(-rate * l)) / rate;
  return {m1, m2, v};
}

std::array<double, 3> cut_closed_form(const Params& p, double theta) {
  const std::array<double, 2> r = cut_generator(p);
  const double m1 = p.m0 * (1.0 - theta);
  const double m2 = p.m0 * (1.0 - theta);
  const double v =
      p.v0 - (r[0] * p.m0 + r[1] * p.m0) * (theta - 0.5 * theta * theta);
  return {m1, m2, v};
}

double fe_limit(const Params& p) {
  const std::array<double, 2> a = channel_energies(p);
  const double rate = a[0] * a[0] + a[1] * a[1];
  return p.v0 - (a[0] + a[1]) * p.m0 * p.m0 / rate;
}

double cut_final(const Params& p) {
  const std::array<double, 2> r = cut_generator(p);
  return p.v0 - 0.5 * (r[0] + r[1]) * p.m0;
}

double shift_difference(const Params& p) { return cut_final(p) - fe_limit(p); }

namespace {

std::vector<ScalarMonitor> interaction_monitor() {
  return {{"V", [](std::span<const double> s) { return s[2]; }}};
}

ScalarMonitor coupling_measure() {
  return {"coupling_norm",
          [](std::span<const double> s) { return std::hypot(s[0], s[1]); }};
}

}  // namespace

FlowProblem fe_problem(const Params& p) {
  const std::array<double, 2> a = channel_energies(p);
  FlowProblem prob;
  prob.dimension = 3;
  prob.rhs = [a](double, std::span<const double> s, std::span<double> d) {
    d[0] = -a[0] * a[0] * s[0];
    d[1] = -a[1] * a[1] * s[1];
    d[2] = -(a[0] + a[1]) * s[0] * s[1];
  };
  prob.monitors = interaction_monitor();
  prob.convergence_measure = coupling_measure();
  return prob;
}

FlowProblem cut_problem(const Params& p) {
  const std::array<double, 2> r = cut_generator(p);
  const std::array<double, 2> a = channel_energies(p);
  FlowProblem prob;
  prob.dimension = 3;
  prob.rhs = [r, a](double, std::span<const double> s, std::span<double> d) {
    d[0] = -a[0] * r[0];
    d[1] = -a[1] * r[1];
    d[2] = -r[0] * s[1] - r[1] * s[0];
  };
  prob.monitors = interaction_monitor();
  prob.convergence_measure = coupling_measure();
  return prob;
}

double default_fe_l_max(const Params& p) {
  const std::array<double, 2> a = channel_energies(p);
  double min_rate = std::numeric_limits<double>::infinity();
  for (double e : a) {
    const double rate = e * e;
    if (rate > 1e-12) min_rate = std::min(min_rate, rate);
  }
  if (!std::isfinite(min_rate)) return 100.0;
  return std::clamp(50.0 / min_rate, 1.0, 1e5);
}

}  // namespace flowdiag::electron_phonon
