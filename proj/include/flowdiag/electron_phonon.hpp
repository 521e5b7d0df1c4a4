#pragma once

#include <array>

#include "flowdiag/flow_engine.hpp"

// Two coupling channels with energies omega + delta and omega - delta feeding
// an effective interaction V. Eliminating the couplings shifts V; the two
// flows disagree by a term of order delta^2 because the fixed-generator route
// divides by omega^2 - delta^2 while the drift route divides by
// omega^2 + delta^2.
namespace flowdiag::electron_phonon {

struct Params {
  double omega = 1.0;
  double delta = 0.0;
  double m0 = 0.0;
  double v0 = 0.0;

  // Throws ContractViolation for non-finite values or omega < 0 and
  // DegenerateChannelError when omega and delta both vanish.
  void validate() const;
};

std::array<double, 2> channel_energies(const Params& p);  // {omega+delta, omega-delta}
bool cut_resonant(const Params& p);                       // a channel energy is zero

// Fixed-generator amplitudes m0 / alpha_i; throws ResonanceError when
// cut_resonant.
std::array<double, 2> cut_generator(const Params& p);

// State layout for both flows: {M1, M2, V}.
std::array<double, 3> fe_closed_form(const Params& p, double l);
std::array<double, 3> cut_closed_form(const Params& p, double theta);

double fe_limit(const Params& p);   // v0 - omega m0^2 / (omega^2 + delta^2)
double cut_final(const Params& p);  // v0 - omega m0^2 / (omega^2 - delta^2)

// cut_final - fe_limit = -2 m0^2 omega delta^2 /
//                        ((omega^2 - delta^2)(omega^2 + delta^2)).
double shift_difference(const Params& p);

// dMi/dl = -alpha_i^2 Mi, dV/dl = -(alpha1 + alpha2) M1 M2.
// Monitor: V. Convergence measure: sqrt(M1^2 + M2^2); at resonance one
// channel never decays and the flow runs to l_max instead.
FlowProblem fe_problem(const Params& p);

// dMi/dtheta = -m0, dV/dtheta = -R1 M2 - R2 M1 with fixed R_i.
FlowProblem cut_problem(const Params& p);

double default_fe_l_max(const Params& p);

}  // namespace flowdiag::electron_phonon
