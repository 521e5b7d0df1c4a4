#include "flowdiag/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "flowdiag/electron_phonon.hpp"
#include "flowdiag/errors.hpp"
#include "flowdiag/flow_engine.hpp"
#include "flowdiag/json_writer.hpp"
#include "flowdiag/matrix_flow.hpp"
#include "flowdiag/parallel.hpp"
#include "flowdiag/quadratic_boson.hpp"
#include "flowdiag/quantum_evolution.hpp"
#include "flowdiag/random_matrices.hpp"
#include "flowdiag/rng.hpp"
#include "flowdiag/three_boson.hpp"
#include "json.hpp"

namespace flowdiag::scenario {

namespace {

using nlohmann::json;

// Residual ceilings for the exit status contract: a run whose conserved
// quantities drift past these counts as failed even though it produced
// numbers.
constexpr double kInvariantTol = 1e-8;
constexpr double kTraceTol = 1e-9;
constexpr double kPurityTol = 1e-9;

[[noreturn]] void fail(const std::string& key, const std::string& msg) {
  throw ValidationError(key, key + ": " + msg);
}

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(prefix.empty() ? item.key() : prefix + "." + item.key(), "unknown field");
  }
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(key, "value must be finite");
  return x;
}

double num_field(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  return as_number(obj[key], key);
}

std::int64_t int_field(const json& obj, const std::string& prefix, const char* key,
                       std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj[key];
  const std::string full = prefix.empty() ? key : prefix + "." + key;
  if (!v.is_number_integer()) fail(full, "expected an integer");
  return v.get<std::int64_t>();
}

Complex complex_field(const json& obj, const char* key) {
  if (!obj.contains(key)) return {0.0, 0.0};
  const json& v = obj[key];
  if (!v.is_array() || v.size() != 2) fail(key, "expected a [re, im] pair");
  return {as_number(v[0], key), as_number(v[1], key)};
}

enum class Method { Fe, Cut, Both };

bool wants_fe(Method m) { return m != Method::Cut; }
bool wants_cut(Method m) { return m != Method::Fe; }

const char* to_cstr(Method m) {
  switch (m) {
    case Method::Fe: return "fe";
    case Method::Cut: return "cut";
    default: return "both";
  }
}

struct IntegratorSpec {
  IntegratorConfig cfg;
  bool has_l_max = false;
  bool has_threshold = false;
};

struct OutputSpec {
  std::string trajectory_csv;
  std::string report_json;
  std::string sweep_csv;
  std::size_t samples = 101;
};

struct MatrixSpec {
  std::optional<ComplexMatrix> given;
  std::size_t n = 0;  // seeded size when no explicit matrix
  double coupling = 0.5;
  std::optional<ComplexMatrix> generator;
  double theta = 1.0;
  bool track_unitary = false;
};

struct SpinsSpec {
  spins::SpinSystem sys;
  double alpha = 1.0;
  double t_end = 1.0;
};

struct Spec {
  std::string model;
  Method method = Method::Both;
  std::uint64_t seed = 0;
  IntegratorSpec integ;
  OutputSpec out;
  quadratic::Params quad;
  electron_phonon::Params eph;
  three_boson::Params tb;
  MatrixSpec mat;
  SpinsSpec sp;
};

IntegratorSpec parse_integrator(const json& root) {
  IntegratorSpec spec;
  if (!root.contains("integrator")) return spec;
  const json& j = root["integrator"];
  if (!j.is_object()) fail("integrator", "expected an object");
  check_keys(j, "integrator",
             {"method", "abs_tol", "rel_tol", "step", "l_max", "threshold", "max_steps",
              "sample_stride"});
  if (j.contains("method")) {
    const json& m = j["method"];
    if (!m.is_string()) fail("integrator.method", "expected a string");
    const std::string s = m.get<std::string>();
    if (s == "rk45") {
      spec.cfg.method = StepMethod::AdaptiveRk45;
    } else if (s == "rk4") {
      spec.cfg.method = StepMethod::FixedRk4;
    } else {
      fail("integrator.method", "expected rk45 or rk4");
    }
  }
  auto num = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    return as_number(j[key], std::string("integrator.") + key);
  };
  spec.cfg.abs_tol = num("abs_tol", spec.cfg.abs_tol);
  spec.cfg.rel_tol = num("rel_tol", spec.cfg.rel_tol);
  spec.cfg.step = num("step", spec.cfg.step);
  if (spec.cfg.abs_tol <= 0.0) fail("integrator.abs_tol", "must be positive");
  if (spec.cfg.rel_tol <= 0.0) fail("integrator.rel_tol", "must be positive");
  if (spec.cfg.step <= 0.0) fail("integrator.step", "must be positive");
  if (j.contains("l_max")) {
    spec.cfg.l_max = num("l_max", 0.0);
    if (spec.cfg.l_max <= 0.0) fail("integrator.l_max", "must be positive");
    spec.has_l_max = true;
  }
  if (j.contains("threshold")) {
    spec.cfg.convergence_threshold = num("threshold", 0.0);
    if (spec.cfg.convergence_threshold < 0.0) fail("integrator.threshold", "must be >= 0");
    spec.has_threshold = true;
  }
  const std::int64_t ms = int_field(j, "integrator", "max_steps", 1'000'000);
  if (ms < 1 || ms > 100'000'000) fail("integrator.max_steps", "out of range");
  spec.cfg.max_steps = static_cast<std::size_t>(ms);
  const std::int64_t stride = int_field(j, "integrator", "sample_stride", 1);
  if (stride < 1 || stride > 1'000'000) fail("integrator.sample_stride", "out of range");
  spec.cfg.sample_stride = static_cast<std::size_t>(stride);
  return spec;
}

OutputSpec parse_outputs(const json& root) {
  OutputSpec out;
  if (!root.contains("outputs")) return out;
  const json& j = root["outputs"];
  if (!j.is_object()) fail("outputs", "expected an object");
  check_keys(j, "outputs", {"trajectory_csv", "report_json", "sweep_csv", "samples"});
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    if (!j[key].is_string()) fail(std::string("outputs.") + key, "expected a string");
    return j[key].get<std::string>();
  };
  out.trajectory_csv = str("trajectory_csv");
  out.report_json = str("report_json");
  out.sweep_csv = str("sweep_csv");
  const std::int64_t samples = int_field(j, "outputs", "samples", 101);
  if (samples < 2 || samples > 100'001) fail("outputs.samples", "must be in [2, 100001]");
  out.samples = static_cast<std::size_t>(samples);
  return out;
}

ComplexMatrix matrix_field(const json& v, const std::string& key) {
  if (!v.is_object()) fail(key, "expected a matrix object {n, re, im}");
  try {
    return matrix_from_json_text(v.dump());
  } catch (const ValidationError& e) {
    fail(key + "." + e.key, e.what());
  }
}

// Scenarios are flat: model parameters sit beside model/method/seed at the
// top level.
Spec parse_spec(const json& root) {
  if (!root.is_object()) fail("scenario", "scenario must be a JSON object");
  Spec spec;
  if (!root.contains("model") || !root["model"].is_string()) {
    fail("model", "required string field");
  }
  spec.model = root["model"].get<std::string>();
  const bool is_spins = spec.model == "spins";
  if (spec.model != "quadratic" && spec.model != "eph" && spec.model != "threeboson" &&
      spec.model != "matrix" && !is_spins) {
    fail("model", "unknown model '" + spec.model + "'");
  }
  if (root.contains("method")) {
    if (is_spins) fail("method", "spins scenarios evolve in time and take no method");
    if (!root["method"].is_string()) fail("method", "expected a string");
    const std::string m = root["method"].get<std::string>();
    if (m == "fe") {
      spec.method = Method::Fe;
    } else if (m == "cut") {
      spec.method = Method::Cut;
    } else if (m == "both") {
      spec.method = Method::Both;
    } else {
      fail("method", "expected fe, cut, or both");
    }
  }
  if (root.contains("seed")) {
    const json& s = root["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      fail("seed", "expected a non-negative integer");
    }
    spec.seed = s.get<std::uint64_t>();
  }
  spec.integ = parse_integrator(root);
  spec.out = parse_outputs(root);

  if (spec.model == "quadratic") {
    check_keys(root, "", {"model", "method", "seed", "integrator", "outputs", "f0", "g0"});
    spec.quad.f0 = num_field(root, "f0", 1.0);
    spec.quad.g0 = num_field(root, "g0", 0.0);
  } else if (spec.model == "eph") {
    check_keys(root, "",
               {"model", "method", "seed", "integrator", "outputs", "omega", "delta", "m0",
                "v0"});
    spec.eph.omega = num_field(root, "omega", 1.0);
    spec.eph.delta = num_field(root, "delta", 0.0);
    spec.eph.m0 = num_field(root, "m0", 0.0);
    spec.eph.v0 = num_field(root, "v0", 0.0);
  } else if (spec.model == "threeboson") {
    check_keys(root, "",
               {"model", "method", "seed", "integrator", "outputs", "beta1", "beta2",
                "psi1", "psi2", "phi0"});
    spec.tb.beta1 = num_field(root, "beta1", 1.0);
    spec.tb.beta2 = num_field(root, "beta2", 1.0);
    spec.tb.psi1 = complex_field(root, "psi1");
    spec.tb.psi2 = complex_field(root, "psi2");
    spec.tb.phi0 = complex_field(root, "phi0");
  } else if (spec.model == "matrix") {
    check_keys(root, "",
               {"model", "method", "seed", "integrator", "outputs", "matrix", "n",
                "coupling", "generator", "theta", "track_unitary"});
    if (root.contains("matrix") && root.contains("n")) {
      fail("matrix", "give either an explicit matrix or a seeded size n, not both");
    }
    if (root.contains("matrix")) {
      spec.mat.given = matrix_field(root["matrix"], "matrix");
      if (spec.mat.given->n() > 64) fail("matrix.n", "scenario matrices cap at n=64");
    } else {
      const std::int64_t n = int_field(root, "", "n", 0);
      if (n < 1 || n > 64) fail("n", "seeded matrix size must be in [1, 64]");
      spec.mat.n = static_cast<std::size_t>(n);
    }
    spec.mat.coupling = num_field(root, "coupling", 0.5);
    if (spec.mat.coupling < 0.0) fail("coupling", "must be >= 0");
    spec.mat.theta = num_field(root, "theta", 1.0);
    if (root.contains("generator")) {
      spec.mat.generator = matrix_field(root["generator"], "generator");
    }
    if (root.contains("track_unitary")) {
      if (!root["track_unitary"].is_boolean()) fail("track_unitary", "expected a boolean");
      spec.mat.track_unitary = root["track_unitary"].get<bool>();
    }
  } else {  // spins
    check_keys(root, "",
               {"model", "seed", "integrator", "outputs", "n", "omega0", "alpha", "J",
                "t_end"});
    const std::int64_t n = int_field(root, "", "n", 0);
    if (n < 1 || n > 8) fail("n", "spin count must be in [1, 8]");
    spec.sp.sys.n = static_cast<std::size_t>(n);
    spec.sp.sys.omega0 = num_field(root, "omega0", 0.0);
    spec.sp.alpha = num_field(root, "alpha", 1.0);
    spec.sp.t_end = num_field(root, "t_end", 0.0);
    if (spec.sp.t_end <= 0.0 || spec.sp.t_end > 1000.0) {
      fail("t_end", "must be positive and at most 1000");
    }
    if (spec.integ.has_l_max) {
      fail("integrator.l_max", "spins scenarios set the horizon via t_end");
    }
    if (root.contains("J")) {
      const json& jm = root["J"];
      const std::size_t nn = spec.sp.sys.n;
      if (!jm.is_array() || jm.size() != nn) fail("J", "expected an n x n array of rows");
      spec.sp.sys.j.assign(nn * nn, 0.0);
      for (std::size_t a = 0; a < nn; ++a) {
        if (!jm[a].is_array() || jm[a].size() != nn) {
          fail("J", "expected an n x n array of rows");
        }
        for (std::size_t b = 0; b < nn; ++b) {
          spec.sp.sys.j[a * nn + b] = as_number(jm[a][b], "J");
        }
      }
      try {
        spec.sp.sys.validate();
      } catch (const ContractViolation& e) {
        fail("J", e.what());
      }
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Running

std::string join_csv(std::span<const std::string> cols) {
  std::string line;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  line += '\n';
  return line;
}

using RowFn = std::function<std::vector<double>(std::span<const double> state)>;

void append_resampled_rows(std::string& csv, const FlowResult& flow, const char* tag,
                           std::size_t samples, const RowFn& row_fn) {
  std::vector<double> grid(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    grid[k] = flow.final_l * static_cast<double>(k) / static_cast<double>(samples - 1);
  }
  const std::vector<std::vector<double>> states = resample_trajectory(flow, grid);
  for (std::size_t k = 0; k < samples; ++k) {
    if (tag != nullptr) {
      csv += tag;
      csv += ',';
    }
    csv += format_double(grid[k]);
    for (double v : row_fn(states[k])) {
      csv += ',';
      csv += format_double(v);
    }
    csv += '\n';
  }
}

std::optional<std::string> termination_warning(const std::string& run, const FlowResult& f,
                                               double threshold) {
  if (f.termination == Termination::ReachedLMax && threshold > 0.0) {
    return run + ": flow reached l_max before the convergence threshold";
  }
  if (f.termination == Termination::StepLimit) {
    return run + ": step budget exhausted before l_max";
  }
  return std::nullopt;
}

void write_run_header(JsonWriter& w, const FlowResult& flow, const IntegratorConfig& cfg) {
  w.key("termination").value(to_string(flow.termination));
  w.key("final_l").value(flow.final_l);
  w.key("l_max").value(cfg.l_max);
  w.key("threshold").value(cfg.convergence_threshold);
  w.key("samples").value(static_cast<std::uint64_t>(flow.trajectory.size()));
}

struct RunContext {
  const Spec& spec;
  JsonWriter* report;   // null in sweep mode
  std::string* csv;     // null in sweep mode
  std::vector<std::string>* warnings;
  std::vector<std::string> summary_cols;
  std::vector<double> summary_vals;
  bool model_error = false;
  bool residual_failure = false;

  void summary(const char* name, double v) {
    summary_cols.push_back(name);
    summary_vals.push_back(v);
  }
  void warn(std::optional<std::string> msg) {
    if (msg && warnings) warnings->push_back(*msg);
  }
  void check_residual(const std::string& run, const char* name, double value, double tol) {
    if (value <= tol) return;
    residual_failure = true;
    warn(run + ": " + name + " residual exceeds the configured ceiling");
  }
};

const char* error_slug(const std::exception& e) {
  if (dynamic_cast<const ResonanceError*>(&e)) return "resonance";
  if (dynamic_cast<const UnstableModeError*>(&e)) return "unstable_mode";
  if (dynamic_cast<const DegenerateEnergyError*>(&e)) return "degenerate_energy";
  if (dynamic_cast<const DegenerateChannelError*>(&e)) return "degenerate_channel";
  return "numerical_failure";
}

// Runs one method block. A model-level rejection becomes a typed record in
// the report instead of aborting the scenario; the caller maps it to exit
// status 2. All report writes inside fn happen after the fallible work, so a
// caught throw never leaves a torn JSON object. In sweep mode (no report)
// the exception propagates to the per-point handler.
template <typename Fn>
bool try_method(RunContext& ctx, const char* name, Fn&& fn) {
  if (!ctx.report) {
    fn();
    return true;
  }
  try {
    fn();
    return true;
  } catch (const std::domain_error& e) {
    ctx.model_error = true;
    ctx.report->key(name).begin_object();
    ctx.report->key("error").begin_object();
    ctx.report->key("type").value(error_slug(e));
    ctx.report->key("message").value(e.what());
    ctx.report->end_object();
    ctx.report->end_object();
    return false;
  } catch (const NumericalError& e) {
    ctx.model_error = true;
    ctx.report->key(name).begin_object();
    ctx.report->key("error").begin_object();
    ctx.report->key("type").value("numerical_failure");
    ctx.report->key("message").value(e.what());
    ctx.report->end_object();
    ctx.report->end_object();
    return false;
  }
}

IntegratorConfig fe_config(const Spec& spec, double default_l_max) {
  IntegratorConfig cfg = spec.integ.cfg;
  if (!spec.integ.has_l_max) cfg.l_max = default_l_max;
  if (!spec.integ.has_threshold) cfg.convergence_threshold = 1e-8;
  return cfg;
}

IntegratorConfig cut_config(const Spec& spec) {
  IntegratorConfig cfg = spec.integ.cfg;
  cfg.l_max = 1.0;
  cfg.convergence_threshold = 0.0;
  return cfg;
}

void run_quadratic(RunContext& ctx) {
  const Spec& spec = ctx.spec;
  const quadratic::Params& p = spec.quad;
  const RowFn row = [](std::span<const double> s) {
    return std::vector<double>{s[0], s[1], s[0] * s[0] - s[1] * s[1]};
  };
  const double x0[2] = {p.f0, p.g0};
  const double invariant0 = p.f0 * p.f0 - p.g0 * p.g0;

  if (ctx.report) {
    ctx.report->key("parameters").begin_object();
    ctx.report->key("f0").value(p.f0).key("g0").value(p.g0);
    ctx.report->end_object();
    ctx.report->key("runs").begin_object();
  }
  if (ctx.csv) *ctx.csv = "method,l,f,g,f2_minus_g2\n";

  double fe_f = 0.0, cut_f = 0.0;
  bool fe_ok = false, cut_ok = false;
  if (wants_fe(spec.method)) {
    fe_ok = try_method(ctx, "fe", [&] {
      p.validate();
      const double predicted = quadratic::quasiparticle_energy(p);
      const IntegratorConfig cfg = fe_config(spec, quadratic::default_fe_l_max(p));
      const FlowResult res = integrate_flow(quadratic::fe_problem(p), cfg, x0);
      fe_f = res.final_state[0];
      const double drift = std::abs(res.final_state[0] * res.final_state[0] -
                                    res.final_state[1] * res.final_state[1] - invariant0);
      ctx.warn(termination_warning("fe", res, cfg.convergence_threshold));
      ctx.check_residual("fe", "invariant_drift", drift,
                         kInvariantTol * std::max(1.0, std::abs(invariant0)));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "fe", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("fe").begin_object();
        write_run_header(*ctx.report, res, cfg);
        ctx.report->key("f").value(res.final_state[0]);
        ctx.report->key("g").value(res.final_state[1]);
        ctx.report->key("invariant_drift").value(drift);
        ctx.report->key("predicted_energy").value(predicted);
        ctx.report->key("energy_error").value(std::abs(res.final_state[0] - predicted));
        ctx.report->end_object();
      }
      ctx.summary("fe_energy", fe_f);
    });
  }
  if (wants_cut(spec.method)) {
    cut_ok = try_method(ctx, "cut", [&] {
      p.validate();
      const double predicted = quadratic::quasiparticle_energy(p);
      const IntegratorConfig cfg = cut_config(spec);
      const FlowResult res = integrate_flow(quadratic::cut_problem(p), cfg, x0);
      cut_f = res.final_state[0];
      ctx.warn(termination_warning("cut", res, cfg.convergence_threshold));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "cut", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("cut").begin_object();
        write_run_header(*ctx.report, res, cfg);
        ctx.report->key("f").value(res.final_state[0]);
        ctx.report->key("g").value(res.final_state[1]);
        ctx.report->key("generator_amplitude").value(quadratic::cut_generator_amplitude(p));
        ctx.report->key("predicted_energy").value(predicted);
        ctx.report->key("energy_error").value(std::abs(res.final_state[0] - predicted));
        ctx.report->end_object();
      }
      ctx.summary("cut_energy", cut_f);
    });
  }
  ctx.summary("predicted_energy", p.f0 * p.f0 >= p.g0 * p.g0
                                      ? std::sqrt(invariant0)
                                      : std::numeric_limits<double>::quiet_NaN());
  if (ctx.report) {
    ctx.report->end_object();  // runs
    if (spec.method == Method::Both && fe_ok && cut_ok) {
      ctx.report->key("comparison").begin_object();
      ctx.report->key("fe_minus_cut_energy").value(fe_f - cut_f);
      ctx.report->end_object();
    }
  }
}

void run_eph(RunContext& ctx) {
  const Spec& spec = ctx.spec;
  const electron_phonon::Params& p = spec.eph;
  const RowFn row = [](std::span<const double> s) {
    return std::vector<double>{s[0], s[1], s[2]};
  };
  const double x0[3] = {p.m0, p.m0, p.v0};

  if (ctx.report) {
    ctx.report->key("parameters").begin_object();
    ctx.report->key("omega").value(p.omega).key("delta").value(p.delta);
    ctx.report->key("m0").value(p.m0).key("v0").value(p.v0);
    ctx.report->end_object();
    ctx.report->key("runs").begin_object();
  }
  if (ctx.csv) *ctx.csv = "method,l,M1,M2,V\n";

  double fe_v = 0.0, cut_v = 0.0;
  bool fe_ok = false, cut_ok = false;
  if (wants_fe(spec.method)) {
    fe_ok = try_method(ctx, "fe", [&] {
      p.validate();
      const IntegratorConfig cfg = fe_config(spec, electron_phonon::default_fe_l_max(p));
      const FlowResult res = integrate_flow(electron_phonon::fe_problem(p), cfg, x0);
      fe_v = res.final_state[2];
      ctx.warn(termination_warning("fe", res, cfg.convergence_threshold));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "fe", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("fe").begin_object();
        write_run_header(*ctx.report, res, cfg);
        ctx.report->key("M1").value(res.final_state[0]);
        ctx.report->key("M2").value(res.final_state[1]);
        ctx.report->key("V").value(fe_v);
        ctx.report->key("predicted_V").value(electron_phonon::fe_limit(p));
        ctx.report->key("V_error").value(std::abs(fe_v - electron_phonon::fe_limit(p)));
        ctx.report->end_object();
      }
      ctx.summary("fe_V", fe_v);
      ctx.summary("fe_V_predicted", electron_phonon::fe_limit(p));
    });
  }
  if (wants_cut(spec.method)) {
    cut_ok = try_method(ctx, "cut", [&] {
      p.validate();
      electron_phonon::cut_generator(p);  // resonance check up front
      const IntegratorConfig cfg = cut_config(spec);
      const FlowResult res = integrate_flow(electron_phonon::cut_problem(p), cfg, x0);
      cut_v = res.final_state[2];
      ctx.warn(termination_warning("cut", res, cfg.convergence_threshold));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "cut", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("cut").begin_object();
        write_run_header(*ctx.report, res, cfg);
        ctx.report->key("M1").value(res.final_state[0]);
        ctx.report->key("M2").value(res.final_state[1]);
        ctx.report->key("V").value(cut_v);
        ctx.report->key("predicted_V").value(electron_phonon::cut_final(p));
        ctx.report->key("V_error").value(std::abs(cut_v - electron_phonon::cut_final(p)));
        ctx.report->end_object();
      }
      ctx.summary("cut_V", cut_v);
      ctx.summary("cut_V_predicted", electron_phonon::cut_final(p));
    });
  }
  if (ctx.report) {
    ctx.report->end_object();  // runs
    if (spec.method == Method::Both && fe_ok && cut_ok) {
      ctx.report->key("comparison").begin_object();
      ctx.report->key("difference").value(cut_v - fe_v);
      ctx.report->key("predicted_difference").value(electron_phonon::shift_difference(p));
      ctx.report->end_object();
    }
  }
}

void run_threeboson(RunContext& ctx) {
  const Spec& spec = ctx.spec;
  const three_boson::Params& p = spec.tb;
  const RowFn row = [](std::span<const double> s) {
    return std::vector<double>{s[0], s[1], s[2], s[3], s[4], s[5]};
  };
  const double x0[6] = {p.psi1.real(), p.psi1.imag(), p.psi2.real(),
                        p.psi2.imag(), p.phi0.real(), p.phi0.imag()};
  auto write_complex = [&](const char* key, Complex z) {
    ctx.report->key(key).begin_array();
    ctx.report->value(z.real()).value(z.imag());
    ctx.report->end_array();
  };

  if (ctx.report) {
    ctx.report->key("parameters").begin_object();
    ctx.report->key("beta1").value(p.beta1).key("beta2").value(p.beta2);
    write_complex("psi1", p.psi1);
    write_complex("psi2", p.psi2);
    write_complex("phi0", p.phi0);
    ctx.report->end_object();
    ctx.report->key("runs").begin_object();
  }
  if (ctx.csv) {
    *ctx.csv = "method,l,psi1_re,psi1_im,psi2_re,psi2_im,phi_re,phi_im\n";
  }

  Complex fe_phi = 0.0, cut_phi = 0.0;
  bool fe_ok = false, cut_ok = false;
  if (wants_fe(spec.method)) {
    fe_ok = try_method(ctx, "fe", [&] {
      p.validate();
      const IntegratorConfig cfg = fe_config(spec, three_boson::default_fe_l_max(p));
      const FlowResult res = integrate_flow(three_boson::fe_problem(p), cfg, x0);
      fe_phi = {res.final_state[4], res.final_state[5]};
      ctx.warn(termination_warning("fe", res, cfg.convergence_threshold));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "fe", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("fe").begin_object();
        write_run_header(*ctx.report, res, cfg);
        write_complex("phi", fe_phi);
        write_complex("predicted_phi", three_boson::fe_limit(p));
        ctx.report->key("phi_error").value(std::abs(fe_phi - three_boson::fe_limit(p)));
        ctx.report->end_object();
      }
      ctx.summary("fe_phi_re", fe_phi.real());
      ctx.summary("fe_phi_im", fe_phi.imag());
    });
  }
  if (wants_cut(spec.method)) {
    cut_ok = try_method(ctx, "cut", [&] {
      p.validate();
      const IntegratorConfig cfg = cut_config(spec);
      const FlowResult res = integrate_flow(three_boson::cut_problem(p), cfg, x0);
      cut_phi = {res.final_state[4], res.final_state[5]};
      ctx.warn(termination_warning("cut", res, cfg.convergence_threshold));
      if (ctx.csv) append_resampled_rows(*ctx.csv, res, "cut", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("cut").begin_object();
        write_run_header(*ctx.report, res, cfg);
        write_complex("phi", cut_phi);
        write_complex("predicted_phi", three_boson::cut_final(p));
        ctx.report->key("phi_error").value(std::abs(cut_phi - three_boson::cut_final(p)));
        ctx.report->end_object();
      }
      ctx.summary("cut_phi_re", cut_phi.real());
      ctx.summary("cut_phi_im", cut_phi.imag());
    });
  }
  ctx.summary("shift_ratio", p.beta1 > 0 && p.beta2 > 0
                                 ? three_boson::shift_ratio(p)
                                 : std::numeric_limits<double>::quiet_NaN());
  if (ctx.report) {
    ctx.report->end_object();  // runs
    if (spec.method == Method::Both && fe_ok && cut_ok) {
      ctx.report->key("comparison").begin_object();
      const double fe_shift = std::abs(fe_phi - p.phi0);
      const double cut_shift = std::abs(cut_phi - p.phi0);
      ctx.report->key("measured_ratio").value(fe_shift / cut_shift);
      ctx.report->key("predicted_ratio").value(three_boson::shift_ratio(p));
      ctx.report->end_object();
    }
  }
}

void write_eigenvalues(JsonWriter& w, const char* key, std::span<const double> ev) {
  w.key(key).begin_array();
  for (double v : ev) w.value(v);
  w.end_array();
}

std::vector<double> sorted_diagonal(const ComplexMatrix& m) {
  std::vector<double> d(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) d[i] = m(i, i).real();
  std::sort(d.begin(), d.end());
  return d;
}

double max_gap(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

void run_matrix(RunContext& ctx) {
  const Spec& spec = ctx.spec;
  const MatrixSpec& m = spec.mat;

  SeededRng rng(spec.seed);
  const DenseHermitian h0 = m.given ? DenseHermitian(*m.given)
                                    : random_spread_hermitian(m.n, rng, m.coupling);
  const std::size_t n = h0.n();
  const std::vector<double> oracle = reference_eigenvalues(h0);
  const double trace0 = trace(h0.matrix()).real();
  const double fro0 = frobenius_norm(h0.matrix());
  const double trace_sq0 = fro0 * fro0;

  const RowFn row = [n](std::span<const double> s) {
    ComplexMatrix hm(n);
    unflatten_hermitian(s.first(n * n), hm);
    const double f = frobenius_norm(hm);
    return std::vector<double>{off_diagonal_norm(hm), trace(hm).real(), f * f};
  };

  if (ctx.report) {
    ctx.report->key("parameters").begin_object();
    ctx.report->key("n").value(static_cast<std::uint64_t>(n));
    ctx.report->key("source").value(m.given ? "explicit" : "seeded");
    if (!m.given) ctx.report->key("coupling").value(m.coupling);
    if (wants_cut(spec.method)) ctx.report->key("theta").value(m.theta);
    ctx.report->key("track_unitary").value(m.track_unitary);
    ctx.report->end_object();
    ctx.report->key("runs").begin_object();
  }
  if (ctx.csv) *ctx.csv = "method,l,offdiag_norm,trace,trace_sq\n";

  std::vector<double> fe_ev, cut_ev;
  bool fe_ok = false, cut_ok = false;
  if (wants_fe(spec.method)) {
    fe_ok = try_method(ctx, "fe", [&] {
      const IntegratorConfig cfg = fe_config(spec, suggested_l_max(h0));
      const MatrixFlowOutcome out = flow_diagonalize(h0, cfg, m.track_unitary);
      if (out.flow.termination == Termination::NumericalFailure) {
        throw NumericalError("matrix flow lost finite precision");
      }
      ctx.warn(termination_warning("fe", out.flow, cfg.convergence_threshold));
      fe_ev = sorted_diagonal(out.final_h.matrix());
      const double offdiag = off_diagonal_norm(out.final_h.matrix());
      const double trace_drift = std::abs(trace(out.final_h.matrix()).real() - trace0);
      const double fsq = frobenius_norm(out.final_h.matrix());
      const double trace_sq_drift = std::abs(fsq * fsq - trace_sq0);
      ctx.check_residual("fe", "trace_drift", trace_drift,
                         kTraceTol * std::max(1.0, std::abs(trace0)));
      ctx.check_residual("fe", "trace_sq_drift", trace_sq_drift,
                         kTraceTol * std::max(1.0, trace_sq0));
      if (ctx.csv) append_resampled_rows(*ctx.csv, out.flow, "fe", spec.out.samples, row);
      if (ctx.report) {
        ctx.report->key("fe").begin_object();
        write_run_header(*ctx.report, out.flow, cfg);
        ctx.report->key("offdiag_norm").value(offdiag);
        ctx.report->key("trace_drift").value(trace_drift);
        ctx.report->key("trace_sq_drift").value(trace_sq_drift);
        write_eigenvalues(*ctx.report, "eigenvalues", fe_ev);
        ctx.report->key("spectrum_error").value(max_gap(fe_ev, oracle));
        if (out.unitary) {
          const ComplexMatrix rebuilt =
              multiply(multiply(*out.unitary, h0.matrix()), adjoint(*out.unitary));
          ctx.report->key("reconstruction_error")
              .value(frobenius_norm(subtract(rebuilt, out.final_h.matrix())));
        }
        ctx.report->end_object();
      }
      ctx.summary("fe_offdiag", offdiag);
      ctx.summary("fe_spectrum_error", max_gap(fe_ev, oracle));
    });
  }
  if (wants_cut(spec.method)) {
    cut_ok = try_method(ctx, "cut", [&] {
      AntiHermitianGenerator gen = [&] {
        if (m.generator) return AntiHermitianGenerator(*m.generator);
        SeededRng grng(spec.seed + 1);
        return random_anti_hermitian(n, grng, m.coupling);
      }();
      if (gen.n() != n) fail("generator", "generator size must match the matrix");
      IntegratorConfig ccfg = cut_config(spec);
      ccfg.l_max = std::abs(m.theta);
      const OneStepCutOutcome out = one_step_cut(h0, gen, m.theta, ccfg);
      ctx.warn(termination_warning("cut", out.ode_flow, 0.0));
      cut_ev = reference_eigenvalues(out.h);
      const double offdiag = off_diagonal_norm(out.h.matrix());
      if (ctx.csv) {
        append_resampled_rows(*ctx.csv, out.ode_flow, "cut", spec.out.samples, row);
      }
      if (ctx.report) {
        ctx.report->key("cut").begin_object();
        write_run_header(*ctx.report, out.ode_flow, ccfg);
        ctx.report->key("offdiag_norm").value(offdiag);
        ctx.report->key("route_gap").value(out.route_gap);
        write_eigenvalues(*ctx.report, "eigenvalues", cut_ev);
        ctx.report->key("spectrum_error").value(max_gap(cut_ev, oracle));
        ctx.report->end_object();
      }
      ctx.summary("cut_offdiag", offdiag);
      ctx.summary("cut_route_gap", out.route_gap);
    });
  }
  if (ctx.report) {
    ctx.report->end_object();  // runs
    if (spec.method == Method::Both && fe_ok && cut_ok) {
      ctx.report->key("comparison").begin_object();
      ctx.report->key("spectrum_gap").value(max_gap(fe_ev, cut_ev));
      ctx.report->end_object();
    }
  }
}

void run_spins(RunContext& ctx) {
  const Spec& spec = ctx.spec;
  const SpinsSpec& sp = spec.sp;

  if (ctx.report) {
    ctx.report->key("parameters").begin_object();
    ctx.report->key("n").value(static_cast<std::uint64_t>(sp.sys.n));
    ctx.report->key("omega0").value(sp.sys.omega0);
    ctx.report->key("alpha").value(sp.alpha);
    ctx.report->key("t_end").value(sp.t_end);
    ctx.report->key("coupled").value(!sp.sys.j.empty());
    ctx.report->end_object();
    ctx.report->key("runs").begin_object();
  }

  try_method(ctx, "evolution", [&] {
    sp.sys.validate();
    const ComplexMatrix h = spins::hamiltonian(sp.sys);
    const ComplexMatrix rho0 = spins::transverse_deviation(sp.sys.n, sp.alpha);
    const std::size_t n = sp.sys.n;
    const std::size_t dim = rho0.n();

    IntegratorConfig cfg = spec.integ.cfg;
    cfg.l_max = sp.t_end;
    cfg.convergence_threshold = 0.0;
    const FlowResult res =
        integrate_flow(spins::liouville_problem(h), cfg, flatten_complex(rho0));
    if (res.termination == Termination::NumericalFailure) {
      throw NumericalError("spin evolution lost finite precision");
    }
    ctx.warn(termination_warning("evolution", res, 0.0));

    const RowFn row = [dim](std::span<const double> s) {
      ComplexMatrix rho(dim);
      unflatten_complex(s, rho);
      const std::vector<double> w = spins::order_spectrum(rho);
      std::vector<double> out(w.begin() + 1, w.end());
      out.push_back(std::abs(trace(rho)));
      const double f = frobenius_norm(rho);
      out.push_back(f * f);
      return out;
    };
    if (ctx.csv) {
      std::vector<std::string> cols{"t"};
      for (std::size_t k = 1; k <= n; ++k) cols.push_back("W_" + std::to_string(k));
      cols.push_back("trace_check");
      cols.push_back("purity_check");
      *ctx.csv = join_csv(cols);
      append_resampled_rows(*ctx.csv, res, nullptr, spec.out.samples, row);
    }

    ComplexMatrix rho_end(dim);
    unflatten_complex(res.final_state, rho_end);
    const std::vector<double> w_end = spins::order_spectrum(rho_end);
    const double purity0 = frobenius_norm(rho0) * frobenius_norm(rho0);
    const double fend = frobenius_norm(rho_end);
    const double purity_end = fend * fend;
    ctx.check_residual("evolution", "trace", std::abs(trace(rho_end)), kTraceTol);
    ctx.check_residual("evolution", "purity_drift", std::abs(purity_end - purity0),
                       kPurityTol * std::max(1.0, purity0));

    if (ctx.report) {
      ctx.report->key("evolution").begin_object();
      write_run_header(*ctx.report, res, cfg);
      ctx.report->key("trace_check").value(std::abs(trace(rho_end)));
      ctx.report->key("purity_check").value(purity_end);
      ctx.report->key("purity_drift").value(std::abs(purity_end - purity0));
      ctx.report->key("weights").begin_array();
      for (std::size_t k = 1; k <= n; ++k) ctx.report->value(w_end[k]);
      ctx.report->end_array();
      ctx.report->end_object();
    }
    for (std::size_t k = 1; k <= n; ++k) {
      ctx.summary_cols.push_back("W_" + std::to_string(k));
      ctx.summary_vals.push_back(w_end[k]);
    }
    ctx.summary("trace_check", std::abs(trace(rho_end)));
    ctx.summary("purity_check", purity_end);
  });
  if (ctx.report) ctx.report->end_object();  // runs
}

// Runs one parsed scenario. Fills the sweep summary always and report/csv/
// warnings when the pointers are set.
void run_spec(RunContext& ctx) {
  const std::string& model = ctx.spec.model;
  if (model == "quadratic") {
    run_quadratic(ctx);
  } else if (model == "eph") {
    run_eph(ctx);
  } else if (model == "threeboson") {
    run_threeboson(ctx);
  } else if (model == "matrix") {
    run_matrix(ctx);
  } else {
    run_spins(ctx);
  }
}

// Must stay in step with the ctx.summary calls above.
std::vector<std::string> summary_columns(const Spec& spec) {
  std::vector<std::string> cols;
  const bool fe = wants_fe(spec.method);
  const bool cut = wants_cut(spec.method);
  if (spec.model == "quadratic") {
    if (fe) cols.push_back("fe_energy");
    if (cut) cols.push_back("cut_energy");
    cols.push_back("predicted_energy");
  } else if (spec.model == "eph") {
    if (fe) {
      cols.push_back("fe_V");
      cols.push_back("fe_V_predicted");
    }
    if (cut) {
      cols.push_back("cut_V");
      cols.push_back("cut_V_predicted");
    }
  } else if (spec.model == "threeboson") {
    if (fe) {
      cols.push_back("fe_phi_re");
      cols.push_back("fe_phi_im");
    }
    if (cut) {
      cols.push_back("cut_phi_re");
      cols.push_back("cut_phi_im");
    }
    cols.push_back("shift_ratio");
  } else if (spec.model == "matrix") {
    if (fe) {
      cols.push_back("fe_offdiag");
      cols.push_back("fe_spectrum_error");
    }
    if (cut) {
      cols.push_back("cut_offdiag");
      cols.push_back("cut_route_gap");
    }
  } else {
    for (std::size_t k = 1; k <= spec.sp.sys.n; ++k) {
      cols.push_back("W_" + std::to_string(k));
    }
    cols.push_back("trace_check");
    cols.push_back("purity_check");
  }
  return cols;
}

json parse_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("scenario JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sweep expansion

const std::map<std::string, std::vector<std::string>>& sweepable_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"quadratic", {"f0", "g0"}},
      {"eph", {"omega", "delta", "m0", "v0"}},
      {"threeboson", {"beta1", "beta2"}},
      {"matrix", {"n", "coupling", "theta"}},
      {"spins", {"omega0", "alpha", "t_end"}},
  };
  return keys;
}

constexpr std::size_t kSweepCap = 10'000;

struct SweepPlan {
  json base;                      // outputs stripped
  std::vector<std::string> keys;  // sorted swept keys
  std::vector<std::vector<json>> values;
  std::size_t points = 1;
  OutputSpec out;
};

// Array values on sweepable keys become grid axes. Arrays elsewhere are left
// for parse_spec, which either accepts them (complex pairs, coupling rows) or
// rejects them with the key named.
SweepPlan plan_sweep(std::string_view text) {
  SweepPlan plan;
  plan.base = parse_text(text);
  if (!plan.base.is_object()) fail("scenario", "scenario must be a JSON object");
  if (!plan.base.contains("model") || !plan.base["model"].is_string()) {
    fail("model", "required string field");
  }
  const std::string model = plan.base["model"].get<std::string>();
  const auto it = sweepable_keys().find(model);
  if (it == sweepable_keys().end()) fail("model", "unknown model '" + model + "'");
  plan.out = parse_outputs(plan.base);

  for (const std::string& key : it->second) {
    if (!plan.base.contains(key) || !plan.base[key].is_array()) continue;
    std::vector<json> vals;
    for (const json& v : plan.base[key]) {
      if (!v.is_number()) fail(key, "sweep values must be numbers");
      vals.push_back(v);
    }
    if (vals.empty()) fail(key, "sweep array must not be empty");
    plan.keys.push_back(key);
    plan.values.push_back(std::move(vals));
  }
  // sweepable_keys lists are not sorted; the grid order contract is.
  std::vector<std::size_t> order(plan.keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return plan.keys[a] < plan.keys[b]; });
  std::vector<std::string> keys;
  std::vector<std::vector<json>> values;
  for (std::size_t i : order) {
    keys.push_back(plan.keys[i]);
    values.push_back(plan.values[i]);
  }
  plan.keys = std::move(keys);
  plan.values = std::move(values);

  for (const auto& vals : plan.values) {
    if (plan.points > kSweepCap) break;
    plan.points *= vals.size();
  }
  if (plan.points > kSweepCap) fail("scenario", "sweep grid exceeds 10000 points");
  plan.base.erase("outputs");
  return plan;
}

json point_scenario(const SweepPlan& plan, std::size_t index) {
  json j = plan.base;
  std::size_t rem = index;
  for (std::size_t k = plan.keys.size(); k-- > 0;) {
    const std::vector<json>& vals = plan.values[k];
    j[plan.keys[k]] = vals[rem % vals.size()];
    rem /= vals.size();
  }
  return j;
}

// Per-point failures inside the parallel loop are recorded, never thrown
// across the region. Model-domain rejections mark the point's results NaN so
// a sweep can straddle a validity boundary; everything else aborts the sweep
// once the loop has drained.
enum class PointError { None, Domain, Validation, Io, Numerical, Other };

SweepArtifacts sweep_impl(std::string_view text, bool threaded) {
  const SweepPlan plan = plan_sweep(text);

  // Schema errors shared by every point surface here, before any work runs.
  const Spec spec0 = parse_spec(point_scenario(plan, 0));
  const std::vector<std::string> result_cols = summary_columns(spec0);

  std::vector<std::vector<double>> swept(plan.points);
  std::vector<std::vector<double>> results(plan.points);
  std::vector<PointError> errors(plan.points, PointError::None);
  std::vector<std::string> messages(plan.points);

  const int threads = threaded ? par::thread_cap() : 1;
  const bool run_parallel = threaded && threads > 1 && plan.points > 1;
#pragma omp parallel for schedule(static) num_threads(threads) if (run_parallel)
  for (std::size_t i = 0; i < plan.points; ++i) {
    const json j = point_scenario(plan, i);
    std::vector<double> row;
    for (const std::string& key : plan.keys) {
      row.push_back(j[key].get<double>());
    }
    swept[i] = std::move(row);
    try {
      const Spec spec = parse_spec(j);
      RunContext ctx{spec, nullptr, nullptr, nullptr, {}, {}};
      run_spec(ctx);
      results[i] = std::move(ctx.summary_vals);
    } catch (const ValidationError& e) {
      errors[i] = PointError::Validation;
      messages[i] = e.what();
    } catch (const std::domain_error& e) {
      errors[i] = PointError::Domain;
      messages[i] = e.what();
    } catch (const IoError& e) {
      errors[i] = PointError::Io;
      messages[i] = e.what();
    } catch (const NumericalError& e) {
      errors[i] = PointError::Numerical;
      messages[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = PointError::Other;
      messages[i] = e.what();
    }
    if (errors[i] == PointError::Domain) {
      results[i].assign(result_cols.size(), std::numeric_limits<double>::quiet_NaN());
    }
  }

  for (std::size_t i = 0; i < plan.points; ++i) {
    switch (errors[i]) {
      case PointError::None:
      case PointError::Domain:
        break;
      case PointError::Validation:
        throw ValidationError("scenario", messages[i]);
      case PointError::Io:
        throw IoError(messages[i]);
      case PointError::Numerical:
      case PointError::Other:
        throw NumericalError(messages[i]);
    }
  }

  SweepArtifacts art;
  art.points = plan.points;
  art.csv_path = plan.out.sweep_csv;
  std::vector<std::string> header = plan.keys;
  header.insert(header.end(), result_cols.begin(), result_cols.end());
  art.csv = join_csv(header);
  for (std::size_t i = 0; i < plan.points; ++i) {
    std::string line;
    for (double v : swept[i]) {
      if (!line.empty()) line += ',';
      line += format_double(v);
    }
    for (double v : results[i]) {
      if (!line.empty()) line += ',';
      line += format_double(v);
    }
    art.csv += line;
    art.csv += '\n';
  }
  return art;
}

}  // namespace

RunArtifacts run_scenario_text(std::string_view text) {
  const json root = parse_text(text);
  const Spec spec = parse_spec(root);

  JsonWriter report;
  std::string csv;
  std::vector<std::string> warnings;
  RunContext ctx{spec, &report, &csv, &warnings, {}, {}};

  report.begin_object();
  report.key("model").value(spec.model);
  if (spec.model != "spins") report.key("method").value(to_cstr(spec.method));
  report.key("seed").value(static_cast<std::uint64_t>(spec.seed));
  run_spec(ctx);
  report.key("integrator").begin_object();
  report.key("method").value(spec.integ.cfg.method == StepMethod::AdaptiveRk45 ? "rk45"
                                                                               : "rk4");
  report.key("abs_tol").value(spec.integ.cfg.abs_tol);
  report.key("rel_tol").value(spec.integ.cfg.rel_tol);
  report.key("step").value(spec.integ.cfg.step);
  report.key("max_steps").value(static_cast<std::uint64_t>(spec.integ.cfg.max_steps));
  report.key("sample_stride").value(static_cast<std::uint64_t>(spec.integ.cfg.sample_stride));
  report.end_object();
  report.key("warnings").begin_array();
  for (const std::string& w : warnings) report.value(w);
  report.end_array();
  report.end_object();

  RunArtifacts art;
  art.report = report.str();
  art.report += '\n';
  art.trajectory_csv = std::move(csv);
  art.report_path = spec.out.report_json;
  art.csv_path = spec.out.trajectory_csv;
  art.model_error = ctx.model_error;
  art.residual_failure = ctx.residual_failure;
  return art;
}

SweepArtifacts sweep_scenario_text(std::string_view text) { return sweep_impl(text, true); }

SweepArtifacts sweep_scenario_text_serial(std::string_view text) {
  return sweep_impl(text, false);
}

}  // namespace flowdiag::scenario
