#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "flowdiag/electron_phonon.hpp"
#include "flowdiag/errors.hpp"
#include "flowdiag/quadratic_boson.hpp"
#include "flowdiag/three_boson.hpp"

using namespace flowdiag;

namespace {

FlowResult run(const FlowProblem& prob, std::span<const double> x0, double l_max,
               double threshold = 0.0) {
  IntegratorConfig cfg;
  cfg.l_max = l_max;
  cfg.convergence_threshold = threshold;
  return integrate_flow(prob, cfg, x0);
}

}  // namespace

TEST_CASE("quadratic: parameter validation") {
  quadratic::Params p{1.0, 0.6};
  p.validate();
  CHECK_THROWS_AS((quadratic::Params{1.0, 1.0}.validate()), UnstableModeError);
  CHECK_THROWS_AS((quadratic::Params{1.0, -1.2}.validate()), UnstableModeError);
  CHECK_THROWS_AS((quadratic::Params{-1.0, 0.0}.validate()), ContractViolation);
  CHECK_THROWS_AS((quadratic::Params{0.0, 0.0}.validate()), ContractViolation);
}

TEST_CASE("quadratic: energy and generator amplitude") {
  const quadratic::Params p{1.0, 0.6};
  CHECK(quadratic::quasiparticle_energy(p) == doctest::Approx(0.8).epsilon(1e-15));
  // atanh(0.6) = ln 2.
  CHECK(quadratic::cut_generator_amplitude(p) ==
        doctest::Approx(0.69314718055994531).epsilon(1e-15));
}

TEST_CASE("quadratic: closed forms hit the initial condition and the limit") {
  for (const double g0 : {0.6, -0.6, 0.0}) {
    const quadratic::Params p{1.0, g0};
    const std::array<double, 2> at0 = quadratic::fe_closed_form(p, 0.0);
    CHECK(at0[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(at0[1] == doctest::Approx(g0).epsilon(1e-12));
    const std::array<double, 2> cut0 = quadratic::cut_closed_form(p, 0.0);
    CHECK(cut0[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cut0[1] == doctest::Approx(g0).epsilon(1e-12));
  }
  const quadratic::Params p{1.0, 0.6};
  const std::array<double, 2> far = quadratic::fe_closed_form(p, 40.0);
  CHECK(far[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::abs(far[1]) < 1e-12);
  const std::array<double, 2> end = quadratic::cut_closed_form(p, 1.0);
  CHECK(end[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(std::abs(end[1]) < 1e-14);
  // The invariant holds along both closed forms.
  for (double l : {0.1, 0.5, 2.0}) {
    const std::array<double, 2> fe = quadratic::fe_closed_form(p, l);
    CHECK(fe[0] * fe[0] - fe[1] * fe[1] == doctest::Approx(0.64).epsilon(1e-12));
    const std::array<double, 2> cut = quadratic::cut_closed_form(p, l * 0.5);
    CHECK(cut[0] * cut[0] - cut[1] * cut[1] == doctest::Approx(0.64).epsilon(1e-12));
  }
}

TEST_CASE("quadratic: numeric drift flow matches the closed form") {
  const quadratic::Params p{1.0, 0.6};
  const double x0[2] = {p.f0, p.g0};
  const FlowResult res = run(quadratic::fe_problem(p), x0, 3.0);
  const std::array<double, 2> want = quadratic::fe_closed_form(p, 3.0);
  CHECK(res.final_state[0] == doctest::Approx(want[0]).epsilon(1e-9));
  CHECK(res.final_state[1] == doctest::Approx(want[1]).epsilon(1e-9));

  const FlowResult conv =
      run(quadratic::fe_problem(p), x0, quadratic::default_fe_l_max(p), 1e-10);
  CHECK(conv.termination == Termination::Converged);
  CHECK(conv.final_state[0] == doctest::Approx(0.8).epsilon(1e-8));
  for (const TrajectorySample& s : conv.trajectory) {
    CHECK(s.monitors[0] == doctest::Approx(0.64).epsilon(1e-9));
  }
}

TEST_CASE("quadratic: numeric rotation flow closes the coupling at theta 1") {
  const quadratic::Params p{1.0, 0.6};
  const double x0[2] = {p.f0, p.g0};
  const FlowResult res = run(quadratic::cut_problem(p), x0, 1.0);
  CHECK(res.termination == Termination::ReachedLMax);
  CHECK(res.final_state[0] == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(std::abs(res.final_state[1]) < 1e-9);

  const std::array<double, 2> mid = quadratic::cut_closed_form(p, 0.4);
  const FlowResult part = run(quadratic::cut_problem(p), x0, 0.4);
  CHECK(part.final_state[0] == doctest::Approx(mid[0]).epsilon(1e-9));
  CHECK(part.final_state[1] == doctest::Approx(mid[1]).epsilon(1e-9));
}

TEST_CASE("electron_phonon: validation and channel bookkeeping") {
  electron_phonon::Params p{1.0, 0.5, 0.3, 0.2};
  p.validate();
  CHECK_THROWS_AS((electron_phonon::Params{-1.0, 0.0, 0.1, 0.0}.validate()),
                  ContractViolation);
  CHECK_THROWS_AS((electron_phonon::Params{0.0, 0.0, 0.1, 0.0}.validate()),
                  DegenerateChannelError);
  electron_phonon::Params{0.0, 0.5, 0.1, 0.0}.validate();

  const std::array<double, 2> a = electron_phonon::channel_energies(p);
  CHECK(a[0] == doctest::Approx(1.5));
  CHECK(a[1] == doctest::Approx(0.5));
  CHECK_FALSE(electron_phonon::cut_resonant(p));
  CHECK(electron_phonon::cut_resonant({1.0, 1.0, 0.3, 0.0}));
  CHECK(electron_phonon::cut_resonant({1.0, -1.0, 0.3, 0.0}));
  CHECK_THROWS_AS(electron_phonon::cut_generator({1.0, 1.0, 0.3, 0.0}), ResonanceError);
}

TEST_CASE("electron_phonon: frozen interaction shifts") {
  const electron_phonon::Params p{1.0, 0.5, 0.3, 0.2};
  // omega m0^2 / (omega^2 + delta^2) = 0.09 / 1.25 = 0.072.
  CHECK(electron_phonon::fe_limit(p) == doctest::Approx(0.128).epsilon(1e-14));
  // omega m0^2 / (omega^2 - delta^2) = 0.09 / 0.75 = 0.12.
  CHECK(electron_phonon::cut_final(p) == doctest::Approx(0.08).epsilon(1e-14));
  CHECK(electron_phonon::shift_difference(p) == doctest::Approx(-0.048).epsilon(1e-12));
  // The closed-form difference formula.
  const double direct = -2.0 * 0.09 * 1.0 * 0.25 / (0.75 * 1.25);
  CHECK(electron_phonon::shift_difference(p) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("electron_phonon: numeric flows land on both limits") {
  const electron_phonon::Params p{1.0, 0.5, 0.3, 0.2};
  const double x0[3] = {p.m0, p.m0, p.v0};

  const FlowResult fe = run(electron_phonon::fe_problem(p), x0,
                            electron_phonon::default_fe_l_max(p), 1e-10);
  CHECK(fe.termination == Termination::Converged);
  CHECK(fe.final_state[2] == doctest::Approx(0.128).epsilon(1e-8));

  const FlowResult cut = run(electron_phonon::cut_problem(p), x0, 1.0);
  CHECK(std::abs(cut.final_state[0]) < 1e-10);
  CHECK(std::abs(cut.final_state[1]) < 1e-10);
  CHECK(cut.final_state[2] == doctest::Approx(0.08).epsilon(1e-9));

  const std::array<double, 3> mid = electron_phonon::fe_closed_form(p, 0.8);
  const FlowResult part = run(electron_phonon::fe_problem(p), x0, 0.8);
  for (int k = 0; k < 3; ++k) {
    CHECK(part.final_state[k] == doctest::Approx(mid[k]).epsilon(1e-9));
  }
}

TEST_CASE("electron_phonon: resonance keeps one coupling alive") {
  const electron_phonon::Params p{1.0, 1.0, 0.3, 0.0};
  // V still converges: v0 - m0^2 / (2 omega) = -0.045.
  CHECK(electron_phonon::fe_limit(p) == doctest::Approx(-0.045).epsilon(1e-14));
  const double x0[3] = {p.m0, p.m0, p.v0};
  const FlowResult fe = run(electron_phonon::fe_problem(p), x0,
                            electron_phonon::default_fe_l_max(p), 1e-8);
  CHECK(fe.termination == Termination::ReachedLMax);
  CHECK(fe.final_state[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(fe.final_state[2] == doctest::Approx(-0.045).epsilon(1e-9));
  CHECK_THROWS_AS(electron_phonon::cut_final(p), ResonanceError);
  CHECK_THROWS_AS(electron_phonon::cut_problem(p), ResonanceError);
}

TEST_CASE("electron_phonon: detuning beyond omega flips the rotation shift") {
  const electron_phonon::Params p{0.5, 1.0, 0.2, 0.0};
  CHECK(electron_phonon::cut_final(p) > p.v0);  // omega^2 - delta^2 < 0
  CHECK(electron_phonon::fe_limit(p) < p.v0);
  const double x0[3] = {p.m0, p.m0, p.v0};
  const FlowResult cut = run(electron_phonon::cut_problem(p), x0, 1.0);
  CHECK(cut.final_state[2] ==
        doctest::Approx(electron_phonon::cut_final(p)).epsilon(1e-9));
}

TEST_CASE("three_boson: validation") {
  three_boson::Params p;
  p.validate();
  p.beta2 = 0.0;
  CHECK_THROWS_AS(p.validate(), DegenerateEnergyError);
  p.beta2 = -1.0;
  CHECK_THROWS_AS(p.validate(), DegenerateEnergyError);
  p.beta2 = 1.0;
  p.psi1 = {std::nan(""), 0.0};
  CHECK_THROWS_AS(p.validate(), ContractViolation);
}

TEST_CASE("three_boson: frozen vertex shifts and their ratio") {
  three_boson::Params p;
  p.beta1 = 1.0;
  p.beta2 = 2.0;
  p.psi1 = {0.2, 0.1};
  p.psi2 = {-0.1, 0.3};
  p.phi0 = {0.05, 0.0};
  // psi1 conj(psi2) = 0.01 - 0.07i.
  const three_boson::Complex fe = three_boson::fe_limit(p);
  CHECK(fe.real() == doctest::Approx(0.038).epsilon(1e-14));
  CHECK(fe.imag() == doctest::Approx(0.084).epsilon(1e-14));
  const three_boson::Complex cut = three_boson::cut_final(p);
  CHECK(cut.real() == doctest::Approx(0.035).epsilon(1e-14));
  CHECK(cut.imag() == doctest::Approx(0.105).epsilon(1e-14));
  CHECK(three_boson::shift_ratio(p) == doctest::Approx(0.8).epsilon(1e-15));
  // Both shifts carry the phase of psi1 conj(psi2): their quotient is the
  // real ratio above.
  const three_boson::Complex q = (fe - p.phi0) / (cut - p.phi0);
  CHECK(q.real() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(std::abs(q.imag()) < 1e-12);
  CHECK(three_boson::shift_ratio(p) <= 1.0);
}

TEST_CASE("three_boson: numeric flows match closed forms and limits") {
  three_boson::Params p;
  p.beta1 = 1.0;
  p.beta2 = 2.0;
  p.psi1 = {0.2, 0.1};
  p.psi2 = {-0.1, 0.3};
  p.phi0 = {0.05, 0.0};
  const double x0[6] = {0.2, 0.1, -0.1, 0.3, 0.05, 0.0};

  const FlowResult fe =
      run(three_boson::fe_problem(p), x0, three_boson::default_fe_l_max(p), 1e-10);
  CHECK(fe.termination == Termination::Converged);
  CHECK(fe.final_state[4] == doctest::Approx(0.038).epsilon(1e-8));
  CHECK(fe.final_state[5] == doctest::Approx(0.084).epsilon(1e-8));

  const std::array<three_boson::Complex, 3> mid = three_boson::fe_closed_form(p, 0.6);
  const FlowResult part = run(three_boson::fe_problem(p), x0, 0.6);
  CHECK(part.final_state[0] == doctest::Approx(mid[0].real()).epsilon(1e-9));
  CHECK(part.final_state[1] == doctest::Approx(mid[0].imag()).epsilon(1e-9));
  CHECK(part.final_state[4] == doctest::Approx(mid[2].real()).epsilon(1e-9));
  CHECK(part.final_state[5] == doctest::Approx(mid[2].imag()).epsilon(1e-9));

  const FlowResult cut = run(three_boson::cut_problem(p), x0, 1.0);
  CHECK(std::abs(cut.final_state[0]) < 1e-10);
  CHECK(std::abs(cut.final_state[2]) < 1e-10);
  CHECK(cut.final_state[4] == doctest::Approx(0.035).epsilon(1e-9));
  CHECK(cut.final_state[5] == doctest::Approx(0.105).epsilon(1e-9));
}

TEST_CASE("three_boson: equal denominators make the flows agree") {
  three_boson::Params p;
  p.beta1 = 1.5;
  p.beta2 = 1.5;
  p.psi1 = {0.3, 0.0};
  p.psi2 = {0.0, 0.2};
  CHECK(three_boson::shift_ratio(p) == doctest::Approx(1.0).epsilon(1e-15));
  const three_boson::Complex fe = three_boson::fe_limit(p);
  const three_boson::Complex cut = three_boson::cut_final(p);
  CHECK(std::abs(fe - cut) < 1e-15);
}
