#pragma once

#include <array>
#include <complex>

#include "flowdiag/flow_engine.hpp"

// Two complex cubic couplings psi_1, psi_2 with energy denominators
// 3 beta_1, 3 beta_2 feeding a quartic vertex phi. Both flows eliminate the
// couplings; the induced shifts of phi share the phase of psi_1 conj(psi_2)
// and differ in magnitude by the ratio 2 b1 b2 / (b1^2 + b2^2) <= 1.
namespace flowdiag::three_boson {

using Complex = std::complex<double>;

struct Params {
  double beta1 = 1.0;
  double beta2 = 1.0;
  Complex psi1 = 0.0;
  Complex psi2 = 0.0;
  Complex phi0 = 0.0;

  // Throws ContractViolation for non-finite values and DegenerateEnergyError
  // when a beta is not positive.
  void validate() const;
};

// Fixed-generator amplitudes psi_i / (3 beta_i).
std::array<Complex, 2> cut_generator(const Params& p);

// State layout for both flows, interleaved (re, im):
// {Psi1, Psi2, Phi} -> 6 reals.
std::array<Complex, 3> fe_closed_form(const Params& p, double l);
std::array<Complex, 3> cut_closed_form(const Params& p, double theta);

Complex fe_limit(const Params& p);   // phi0 - 2 (b1+b2) psi1 conj(psi2) / (b1^2+b2^2)
Complex cut_final(const Params& p);  // phi0 - psi1 conj(psi2) (1/b1 + 1/b2)

// |fe shift| / |cut shift| = 2 b1 b2 / (b1^2 + b2^2).
double shift_ratio(const Params& p);

// dPsi_i/dl = -beta_i^2 Psi_i,
// dPhi/dl = -2 (beta1 + beta2) Psi1 conj(Psi2).
// Monitors: Re Phi, Im Phi. Convergence: sqrt(|Psi1|^2 + |Psi2|^2).
FlowProblem fe_problem(const Params& p);

// dPsi_i/dtheta = -3 beta_i R_i, dPhi/dtheta = -6 R1 conj(Psi2) - 6 conj(R2) Psi1.
FlowProblem cut_problem(const Params& p);

double default_fe_l_max(const Params& p);

}  // namespace flowdiag::three_boson
