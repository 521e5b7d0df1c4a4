#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowdiag/errors.hpp"
#include "flowdiag/flow_engine.hpp"

using namespace flowdiag;

namespace {

FlowProblem exp_decay_problem() {
  FlowProblem p;
  p.dimension = 1;
  p.rhs = [](double, std::span<const double> x, std::span<double> d) { d[0] = -x[0]; };
  return p;
}

// Nonlinear pair df/dl = -g^2, dg/dl = -f g. Conserves f^2 - g^2, and for
// f(0)=1, g(0)=gamma the fixed point is f = sqrt(1 - gamma^2), g = 0.
FlowProblem boson_pair_problem() {
  FlowProblem p;
  p.dimension = 2;
  p.rhs = [](double, std::span<const double> x, std::span<double> d) {
    d[0] = -x[1] * x[1];
    d[1] = -x[0] * x[1];
  };
  p.monitors.push_back({"f2_minus_g2", [](std::span<const double> x) {
                          return x[0] * x[0] - x[1] * x[1];
                        }});
  p.convergence_measure = ScalarMonitor{
      "abs_g", [](std::span<const double> x) { return std::abs(x[1]); }};
  return p;
}

double endpoint_error_fixed(double step) {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = step;
  cfg.l_max = 1.0;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);
  return std::abs(res.final_state[0] - std::exp(-1.0));
}

}  // namespace

TEST_CASE("fixed-step decay hits the analytic solution") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = 1e-3;
  cfg.l_max = 1.0;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.termination == Termination::ReachedLMax);
  CHECK(res.final_l == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(res.final_state[0] - 0.36787944117144233) < 1e-9);
}

TEST_CASE("adaptive boson pair converges to the spectrum") {
  auto p = boson_pair_problem();
  IntegratorConfig cfg;
  cfg.l_max = 100.0;
  cfg.convergence_threshold = 1e-10;
  cfg.abs_tol = 1e-14;
  cfg.rel_tol = 1e-12;
  const double x0[] = {1.0, 0.6};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.termination == Termination::Converged);
  CHECK(std::abs(res.final_state[0] - 0.8) < 1e-8);
  CHECK(std::abs(res.final_state[1]) < 1e-10);
}

TEST_CASE("fixed point converges immediately") {
  auto p = boson_pair_problem();
  IntegratorConfig cfg;
  cfg.l_max = 10.0;
  cfg.convergence_threshold = 1e-10;
  const double x0[] = {0.8, 0.0};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.termination == Termination::Converged);
  CHECK(res.final_l == 0.0);
  CHECK(res.final_state[0] == 0.8);
  CHECK(res.final_state[1] == 0.0);
  CHECK(res.trajectory.size() == 1);
}

TEST_CASE("halving the fixed step shrinks the endpoint error 4th-order fast") {
  const double e1 = endpoint_error_fixed(0.1);
  const double e2 = endpoint_error_fixed(0.05);
  CHECK(e2 > 0.0);
  CHECK(e1 / e2 >= 12.0);
}

TEST_CASE("conserved monitor stays flat along the adaptive trajectory") {
  auto p = boson_pair_problem();
  IntegratorConfig cfg;
  cfg.l_max = 100.0;
  cfg.convergence_threshold = 1e-10;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  const double x0[] = {1.0, 0.6};
  auto res = integrate_flow(p, cfg, x0);
  REQUIRE(!res.trajectory.empty());
  const double m0 = res.trajectory.front().monitors[0];
  CHECK(m0 == doctest::Approx(0.64).epsilon(1e-14));
  for (const auto& s : res.trajectory) {
    CHECK(std::abs(s.monitors[0] - m0) < 1e-9);
  }
}

TEST_CASE("trajectory l strictly increases and monitors stay finite") {
  auto p = boson_pair_problem();
  IntegratorConfig cfg;
  cfg.l_max = 50.0;
  cfg.convergence_threshold = 1e-10;
  cfg.sample_stride = 3;
  const double x0[] = {1.0, 0.9};
  auto res = integrate_flow(p, cfg, x0);
  CHECK((res.termination == Termination::Converged ||
         res.termination == Termination::ReachedLMax));
  for (std::size_t i = 1; i < res.trajectory.size(); ++i) {
    CHECK(res.trajectory[i].l > res.trajectory[i - 1].l);
  }
  for (const auto& s : res.trajectory) {
    for (double m : s.monitors) CHECK(std::isfinite(m));
  }
  CHECK(res.trajectory.back().state == res.final_state);
}

TEST_CASE("dimension mismatch is a contract violation") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  const std::vector<double> x0 = {1.0, 2.0};
  CHECK_THROWS_AS(integrate_flow(p, cfg, x0), ContractViolation);
}

TEST_CASE("config validation rejects bad fields") {
  IntegratorConfig cfg;
  cfg.l_max = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.method = StepMethod::FixedRk4;
  cfg.step = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = {};
  cfg.sample_stride = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}

TEST_CASE("non-finite rhs terminates with numerical_failure instead of throwing") {
  FlowProblem p;
  p.dimension = 1;
  p.rhs = [](double l, std::span<const double> x, std::span<double> d) {
    d[0] = l > 0.1 ? std::nan("") : -x[0];
  };
  IntegratorConfig cfg;
  cfg.l_max = 1.0;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.termination == Termination::NumericalFailure);
  CHECK(res.final_l < 1.0);
  for (double v : res.final_state) CHECK(std::isfinite(v));
}

TEST_CASE("step budget exhaustion reports step_limit") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = 1e-4;
  cfg.l_max = 1.0;
  cfg.max_steps = 10;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.termination == Termination::StepLimit);
  CHECK(res.final_l < 1.0);
}

TEST_CASE("resampling reproduces endpoints exactly and interior points closely") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = 1e-3;
  cfg.l_max = 1.0;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);

  const std::vector<double> pts = {0.0, 0.5, res.final_l};
  auto states = resample_trajectory(res, pts);
  CHECK(states[0][0] == 1.0);
  CHECK(std::abs(states[1][0] - 0.60653065971263342) < 1e-6);
  CHECK(states[2][0] == res.final_state[0]);
}

TEST_CASE("resampling range and ordering errors") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = 0.1;
  cfg.l_max = 1.0;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);

  const std::vector<double> outside = {1.5};
  CHECK_THROWS_AS(resample_trajectory(res, outside), std::out_of_range);
  const std::vector<double> backwards = {0.5, 0.25};
  CHECK_THROWS_AS(resample_trajectory(res, backwards), ContractViolation);
}

TEST_CASE("sample stride still records the final point") {
  auto p = exp_decay_problem();
  IntegratorConfig cfg;
  cfg.method = StepMethod::FixedRk4;
  cfg.step = 0.3;  // 1.0 is not a multiple: final partial step
  cfg.l_max = 1.0;
  cfg.sample_stride = 2;
  const double x0[] = {1.0};
  auto res = integrate_flow(p, cfg, x0);
  CHECK(res.final_l == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.trajectory.back().l == res.final_l);
}
