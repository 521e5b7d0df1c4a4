#include "flowdiag/flow_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "flowdiag/errors.hpp"

namespace flowdiag {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// Cash-Karp embedded 4(5) pair.
constexpr double kA21 = 1.0 / 5.0;
constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
constexpr double kA41 = 3.0 / 10.0, kA42 = -9.0 / 10.0, kA43 = 6.0 / 5.0;
constexpr double kA51 = -11.0 / 54.0, kA52 = 5.0 / 2.0, kA53 = -70.0 / 27.0, kA54 = 35.0 / 27.0;
constexpr double kA61 = 1631.0 / 55296.0, kA62 = 175.0 / 512.0, kA63 = 575.0 / 13824.0,
                 kA64 = 44275.0 / 110592.0, kA65 = 253.0 / 4096.0;
constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 3.0 / 5.0, kC5 = 1.0, kC6 = 7.0 / 8.0;
// 5th-order solution weights and (5th - 4th) error weights.
constexpr double kB1 = 37.0 / 378.0, kB3 = 250.0 / 621.0, kB4 = 125.0 / 594.0,
                 kB6 = 512.0 / 1771.0;
constexpr double kE1 = kB1 - 2825.0 / 27648.0;
constexpr double kE3 = kB3 - 18575.0 / 48384.0;
constexpr double kE4 = kB4 - 13525.0 / 55296.0;
constexpr double kE5 = -277.0 / 14336.0;
constexpr double kE6 = kB6 - 1.0 / 4.0;

class Integrator {
 public:
  Integrator(const FlowProblem& problem, const IntegratorConfig& config,
             std::span<const double> initial)
      : p_(problem), cfg_(config), n_(problem.dimension), x_(initial.begin(), initial.end()) {
    cfg_.validate();
    if (!p_.rhs) throw ContractViolation("FlowProblem.rhs is empty");
    if (initial.size() != n_) {
      throw ContractViolation("initial state length " + std::to_string(initial.size()) +
                              " does not match problem dimension " + std::to_string(n_));
    }
    for (auto& k : k_) k.resize(n_);
    xtmp_.resize(n_);
    xnew_.resize(n_);
    err_.resize(n_);
  }

  FlowResult run() {
    if (!all_finite(x_)) {
      res_.termination = Termination::NumericalFailure;
      finish();
      return std::move(res_);
    }
    eval(0.0, x_, k_[0]);
    if (!all_finite(k_[0])) {
      res_.termination = Termination::NumericalFailure;
      record_sample(/*with_derivative=*/false);
      finish();
      return std::move(res_);
    }
    have_k1_ = true;
    record_sample(true);
    if (converged_now()) {
      res_.termination = Termination::Converged;
      finish();
      return std::move(res_);
    }

    double h = (cfg_.method == StepMethod::FixedRk4) ? cfg_.step : initial_adaptive_step();
    std::size_t accepted = 0;
    for (std::size_t attempts = 0;; ++attempts) {
      if (remaining() <= l_eps()) {
        res_.termination = Termination::ReachedLMax;
        break;
      }
      if (attempts >= cfg_.max_steps) {
        res_.termination = Termination::StepLimit;
        break;
      }
      const double h_try = std::min(h, remaining());
      StepStatus st = (cfg_.method == StepMethod::FixedRk4) ? step_rk4(h_try)
                                                            : step_rk45(h_try, h);
      if (st == StepStatus::NonFinite) {
        res_.termination = Termination::NumericalFailure;
        break;
      }
      if (st == StepStatus::Rejected) continue;

      ++accepted;
      const bool on_stride = (accepted % cfg_.sample_stride) == 0;
      const bool conv = converged_now();
      const bool at_end = remaining() <= l_eps();
      if (on_stride || conv || at_end) record_sample(true);
      if (conv) {
        res_.termination = Termination::Converged;
        break;
      }
    }
    finish();
    return std::move(res_);
  }

 private:
  enum class StepStatus { Accepted, Rejected, NonFinite };

  void eval(double l, std::span<const double> x, std::span<double> out) { p_.rhs(l, x, out); }

  double l_eps() const { return 1e-14 * std::max(1.0, cfg_.l_max); }
  double remaining() const { return cfg_.l_max - l_; }

  bool converged_now() {
    if (!p_.convergence_measure) return false;
    return p_.convergence_measure->eval(x_) < cfg_.convergence_threshold;
  }

  // Ensures k1 = rhs(l_, x_) is available; shared between stepping and sampling.
  void refresh_k1() {
    if (!have_k1_) {
      eval(l_, x_, k_[0]);
      have_k1_ = true;
    }
  }

  void record_sample(bool with_derivative) {
    TrajectorySample s;
    s.l = l_;
    s.state = x_;
    if (with_derivative) {
      refresh_k1();
      s.derivative = k_[0];
    } else {
      s.derivative.assign(n_, std::numeric_limits<double>::quiet_NaN());
    }
    s.monitors.reserve(p_.monitors.size());
    for (const auto& m : p_.monitors) s.monitors.push_back(m.eval(x_));
    res_.trajectory.push_back(std::move(s));
    last_recorded_l_ = l_;
  }

  void finish() {
    if (res_.trajectory.empty() || last_recorded_l_ != l_) {
      // After a numerical failure the rhs may not be evaluable again; reuse
      // k1 when it is already current, otherwise store NaN derivatives.
      const bool derivative_ok =
          have_k1_ || res_.termination != Termination::NumericalFailure;
      record_sample(derivative_ok);
    }
    res_.final_l = l_;
    res_.final_state = x_;
  }

  double initial_adaptive_step() {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::abs(x_[i]);
      d0 += (x_[i] / sc) * (x_[i] / sc);
      d1 += (k_[0][i] / sc) * (k_[0][i] / sc);
    }
    d0 = std::sqrt(d0 / double(n_));
    d1 = std::sqrt(d1 / double(n_));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h0, cfg_.l_max);
  }

  StepStatus step_rk4(double h) {
    refresh_k1();
    auto stage = [&](double c, std::span<const double> k_prev) -> bool {
      for (std::size_t i = 0; i < n_; ++i) xtmp_[i] = x_[i] + h * c * k_prev[i];
      return true;
    };
    stage(0.5, k_[0]);
    eval(l_ + 0.5 * h, xtmp_, k_[1]);
    stage(0.5, k_[1]);
    eval(l_ + 0.5 * h, xtmp_, k_[2]);
    stage(1.0, k_[2]);
    eval(l_ + h, xtmp_, k_[3]);
    for (std::size_t i = 0; i < n_; ++i) {
      xnew_[i] = x_[i] + (h / 6.0) * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
    }
    if (!all_finite(k_[1]) || !all_finite(k_[2]) || !all_finite(k_[3]) || !all_finite(xnew_)) {
      return StepStatus::NonFinite;
    }
    advance(h);
    return StepStatus::Accepted;
  }

  StepStatus step_rk45(double h, double& h_ctrl) {
    refresh_k1();
    for (std::size_t i = 0; i < n_; ++i) xtmp_[i] = x_[i] + h * kA21 * k_[0][i];
    eval(l_ + kC2 * h, xtmp_, k_[1]);
    for (std::size_t i = 0; i < n_; ++i)
      xtmp_[i] = x_[i] + h * (kA31 * k_[0][i] + kA32 * k_[1][i]);
    eval(l_ + kC3 * h, xtmp_, k_[2]);
    for (std::size_t i = 0; i < n_; ++i)
      xtmp_[i] = x_[i] + h * (kA41 * k_[0][i] + kA42 * k_[1][i] + kA43 * k_[2][i]);
    eval(l_ + kC4 * h, xtmp_, k_[3]);
    for (std::size_t i = 0; i < n_; ++i)
      xtmp_[i] =
          x_[i] + h * (kA51 * k_[0][i] + kA52 * k_[1][i] + kA53 * k_[2][i] + kA54 * k_[3][i]);
    eval(l_ + kC5 * h, xtmp_, k_[4]);
    for (std::size_t i = 0; i < n_; ++i)
      xtmp_[i] = x_[i] + h * (kA61 * k_[0][i] + kA62 * k_[1][i] + kA63 * k_[2][i] +
                              kA64 * k_[3][i] + kA65 * k_[4][i]);
    eval(l_ + kC6 * h, xtmp_, k_[5]);

    double err_sq = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      xnew_[i] = x_[i] + h * (kB1 * k_[0][i] + kB3 * k_[2][i] + kB4 * k_[3][i] + kB6 * k_[5][i]);
      err_[i] = h * (kE1 * k_[0][i] + kE3 * k_[2][i] + kE4 * k_[3][i] + kE5 * k_[4][i] +
                     kE6 * k_[5][i]);
      const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(x_[i]), std::abs(xnew_[i]));
      err_sq += (err_[i] / sc) * (err_[i] / sc);
    }
    const double err = std::sqrt(err_sq / double(n_));
    if (!std::isfinite(err) || !all_finite(xnew_)) return StepStatus::NonFinite;

    // new_step = 0.9 * step * (1/err)^(1/5), clamped to [0.2, 5] x step.
    double factor = (err == 0.0) ? 5.0 : 0.9 * std::pow(err, -0.2);
    factor = std::clamp(factor, 0.2, 5.0);
    if (err <= 1.0) {
      h_ctrl = h * factor;
      advance(h);
      return StepStatus::Accepted;
    }
    h_ctrl = h * factor;
    if (h_ctrl < l_eps()) return StepStatus::NonFinite;  // step underflow
    return StepStatus::Rejected;
  }

  void advance(double h) {
    l_ += h;
    std::swap(x_, xnew_);
    have_k1_ = false;  // k1 at the new point is computed lazily
  }

  const FlowProblem& p_;
  IntegratorConfig cfg_;
  std::size_t n_;
  std::vector<double> x_;
  double l_ = 0.0;
  std::vector<double> k_[6];
  std::vector<double> xtmp_, xnew_, err_;
  bool have_k1_ = false;
  double last_recorded_l_ = std::numeric_limits<double>::quiet_NaN();
  FlowResult res_;
};

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::ReachedLMax: return "reached_l_max";
    case Termination::StepLimit: return "step_limit";
    case Termination::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

const char* to_string(StepMethod m) {
  switch (m) {
    case StepMethod::FixedRk4: return "rk4";
    case StepMethod::AdaptiveRk45: return "rk45";
  }
  return "unknown";
}

void IntegratorConfig::validate() const {
  if (method == StepMethod::AdaptiveRk45) {
    if (!(abs_tol > 0.0)) throw ContractViolation("abs_tol must be > 0");
    if (!(rel_tol > 0.0)) throw ContractViolation("rel_tol must be > 0");
  }
  if (method == StepMethod::FixedRk4 && !(step > 0.0)) {
    throw ContractViolation("step must be > 0");
  }
  if (!(l_max > 0.0)) throw ContractViolation("l_max must be > 0");
  if (!(convergence_threshold >= 0.0)) {
    throw ContractViolation("convergence_threshold must be >= 0");
  }
  if (max_steps < 1) throw ContractViolation("max_steps must be >= 1");
  if (sample_stride < 1) throw ContractViolation("sample_stride must be >= 1");
}

FlowResult integrate_flow(const FlowProblem& problem, const IntegratorConfig& config,
                          std::span<const double> initial) {
  Integrator ig(problem, config, initial);
  return ig.run();
}

std::vector<std::vector<double>> resample_trajectory(const FlowResult& result,
                                                     std::span<const double> l_points) {
  const auto& traj = result.trajectory;
  if (traj.empty()) throw ContractViolation("resample_trajectory: empty trajectory");
  const double l_front = traj.front().l;
  const double l_back = traj.back().l;
  const double eps = 1e-12 * std::max(1.0, std::abs(l_back));

  std::vector<std::vector<double>> out;
  out.reserve(l_points.size());
  double prev = -std::numeric_limits<double>::infinity();
  std::size_t seg = 0;
  for (double l : l_points) {
    if (l < prev) throw ContractViolation("resample_trajectory: l_points must be nondecreasing");
    prev = l;
    if (l < l_front - eps || l > l_back + eps) {
      throw std::out_of_range("resample_trajectory: l out of [" + std::to_string(l_front) + ", " +
                              std::to_string(l_back) + "]");
    }
    const double lc = std::clamp(l, l_front, l_back);
    while (seg + 2 < traj.size() && traj[seg + 1].l <= lc) ++seg;
    const auto& a = traj[seg];
    const auto& b = traj[seg + 1 < traj.size() ? seg + 1 : seg];
    if (lc == a.l || &a == &b) {
      out.push_back(a.state);
      continue;
    }
    if (lc == b.l) {
      out.push_back(b.state);
      continue;
    }
    const double h = b.l - a.l;
    const double t = (lc - a.l) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    std::vector<double> x(a.state.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = h00 * a.state[i] + h10 * h * a.derivative[i] + h01 * b.state[i] +
             h11 * h * b.derivative[i];
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace flowdiag
