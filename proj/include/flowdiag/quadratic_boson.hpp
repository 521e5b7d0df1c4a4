#pragma once

#include <array>

#include "flowdiag/flow_engine.hpp"

// Single bosonic mode with a pair-creation term: H has a diagonal energy f
// and an anomalous coupling g. Both flows drive g to zero; the invariant
// f^2 - g^2 fixes the final energy sqrt(f0^2 - g0^2).
namespace flowdiag::quadratic {

struct Params {
  double f0 = 1.0;
  double g0 = 0.0;

  // Throws ContractViolation for non-finite or non-positive f0 and
  // UnstableModeError when |g0| >= f0.
  void validate() const;
};

double quasiparticle_energy(const Params& p);  // sqrt(f0^2 - g0^2)

// Fixed-generator amplitude that zeroes g exactly at theta = 1:
// atanh(g0 / f0).
double cut_generator_amplitude(const Params& p);

// State layout for both flows: {f, g}.
std::array<double, 2> fe_closed_form(const Params& p, double l);
std::array<double, 2> cut_closed_form(const Params& p, double theta);

// Drift equations df/dl = -g^2, dg/dl = -f g. Monitor: f^2 - g^2.
// Convergence measure: |g|.
FlowProblem fe_problem(const Params& p);

// Linear rotation df/dtheta = -G g, dg/dtheta = -G f with fixed G.
FlowProblem cut_problem(const Params& p);

// Horizon giving ~50 decay times of g.
double default_fe_l_max(const Params& p);

}  // namespace flowdiag::quadratic
