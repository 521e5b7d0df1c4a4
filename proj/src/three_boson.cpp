#include "flowdiag/three_boson.hpp"

#include <algorithm>
#include <cmath>

#include "flowdiag/errors.hpp"

namespace flowdiag::three_boson {

namespace {

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

Complex load(std::span<const double> s, std::size_t slot) {
  return {s[2 * slot], s[2 * slot + 1]};
}

void store(std::span<double> d, std::size_t slot, Complex z) {
  d[2 * slot] = z.real();
  d[2 * slot + 1] = z.imag();
}

std::vector<ScalarMonitor> vertex_monitors() {
  return {{"phi_re", [](std::span<const double> s) { return s[4]; }},
          {"phi_im", [](std::span<const double> s) { return s[5]; }}};
}

ScalarMonitor coupling_measure() {
  return {"coupling_norm", [](std::span<const double> s) {
            return std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + s[3] * s[3]);
          }};
}

}  // namespace

void Params::validate() const {
  if (!std::isfinite(beta1) || !std::isfinite(beta2) || !finite(psi1) || !finite(psi2) ||
      !finite(phi0)) {
    throw ContractViolation("three_boson: parameters must be finite");
  }
  if (beta1 <= 0.0 || beta2 <= 0.0) {
    throw DegenerateEnergyError("three_boson: energy denominators require beta > 0");
  }
}

std::array<Complex, 2> cut_generator(const Params& p) {
  p.validate();
  return {p.psi1 / (3.0 * p.beta1), p.psi2 / (3.0 * p.beta2)};
}

std::array<Complex, 3> fe_closed_form(const Params& p, double l) {
  p.validate();
  const double b1 = p.beta1, b2 = p.beta2;
  const Complex psi1 = p.psi1 * std::exp(-b1 * b1 * l);
  const Complex psi2 = p.psi2 * std::exp(-b2 * b2 * l);
  const double rate = b1 * b1 + b2 * b2;
  const Complex phi = p.phi0 - 2.0 * (b1 + b2) * p.psi1 * std::conj(p.psi2) *
                                   (1.0 - std::exp(-rate * l)) / rate;
  return {psi1, psi2, phi};
}

std::array<Complex, 3> cut_closed_form(const Params& p, double theta) {
  p.validate();
  const Complex psi1 = p.psi1 * (1.0 - theta);
  const Complex psi2 = p.psi2 * (1.0 - theta);
  const Complex phi = p.phi0 - 2.0 * (theta - 0.5 * theta * theta) * p.psi1 *
                                   std::conj(p.psi2) * (1.0 / p.beta1 + 1.0 / p.beta2);
  return {psi1, psi2, phi};
}

Complex fe_limit(const Params& p) {
  p.validate();
  const double rate = p.beta1 * p.beta1 + p.beta2 * p.beta2;
  return p.phi0 - 2.0 * (p.beta1 + p.beta2) * p.psi1 * std::conj(p.psi2) / rate;
}

Complex cut_final(const Params& p) {
  p.validate();
  return p.phi0 - p.psi1 * std::conj(p.psi2) * (1.0 / p.beta1 + 1.0 / p.beta2);
}

double shift_ratio(const Params& p) {
  p.validate();
  return 2.0 * p.beta1 * p.beta2 / (p.beta1 * p.beta1 + p.beta2 * p.beta2);
}

FlowProblem fe_problem(const Params& p) {
  p.validate();
  const double b1 = p.beta1, b2 = p.beta2;
  FlowProblem prob;
  prob.dimension = 6;
  prob.rhs = [b1, b2](double, std::span<const double> s, std::span<double> d) {
    const Complex psi1 = load(s, 0);
    const Complex psi2 = load(s, 1);
    store(d, 0, -b1 * b1 * psi1);
    store(d, 1, -b2 * b2 * psi2);
    store(d, 2, -2.0 * (b1 + b2) * psi1 * std::conj(psi2));
  };
  prob.monitors = vertex_monitors();
  prob.convergence_measure = coupling_measure();
  return prob;
}

FlowProblem cut_problem(const Params& p) {
  const std::array<Complex, 2> r = cut_generator(p);
  const double b1 = p.beta1, b2 = p.beta2;
  FlowProblem prob;
  prob.dimension = 6;
  prob.rhs = [r, b1, b2](double, std::span<const double> s, std::span<double> d) {
    const Complex psi1 = load(s, 0);
    const Complex psi2 = load(s, 1);
    store(d, 0, -3.0 * b1 * r[0]);
    store(d, 1, -3.0 * b2 * r[1]);
    store(d, 2, -6.0 * r[0] * std::conj(psi2) - 6.0 * std::conj(r[1]) * psi1);
  };
  prob.monitors = vertex_monitors();
  prob.convergence_measure = coupling_measure();
  return prob;
}

double default_fe_l_max(const Params& p) {
  p.validate();
  const double min_rate = std::min(p.beta1 * p.beta1, p.beta2 * p.beta2);
  return std::clamp(50.0 / min_rate, 1.0, 1e5);
}

}  // namespace flowdiag::three_boson
