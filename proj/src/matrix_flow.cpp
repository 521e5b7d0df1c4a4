#include "flowdiag/matrix_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "flowdiag/errors.hpp"
#include "flowdiag/json_writer.hpp"
#include "json.hpp"

namespace flowdiag {

namespace {

constexpr double kStructureTol = 1e-12;

double structure_scale(const ComplexMatrix& m) { return std::max(1.0, max_abs(m)); }

void flatten_hermitian_into(const ComplexMatrix& h, std::span<double> out) {
  const std::size_t n = h.n();
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) out[p++] = h(i, i).real();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      out[p++] = h(i, j).real();
      out[p++] = h(i, j).imag();
    }
}

void flatten_complex_into(const ComplexMatrix& m, std::span<double> out) {
  std::size_t p = 0;
  for (const Complex& z : m.data()) {
    out[p++] = z.real();
    out[p++] = z.imag();
  }
}

// Generator entries from a packed Hermitian state, without materializing the
// diagonal part separately.
void wegner_from(const ComplexMatrix& h, ComplexMatrix& eta) {
  const std::size_t n = h.n();
  for (std::size_t i = 0; i < n; ++i) {
    eta(i, i) = Complex(0.0, 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = h(i, i).real() - h(j, j).real();
      eta(i, j) = gap * h(i, j);
      eta(j, i) = -std::conj(eta(i, j));
    }
  }
}

std::vector<ScalarMonitor> matrix_monitors(std::size_t n) {
  const std::size_t hsize = n * n;
  auto unpack = [n, hsize](std::span<const double> state) {
    ComplexMatrix h(n);
    unflatten_hermitian(state.first(hsize), h);
    return h;
  };
  std::vector<ScalarMonitor> ms;
  ms.push_back({"offdiag_norm",
                [unpack](std::span<const double> s) { return off_diagonal_norm(unpack(s)); }});
  ms.push_back(
      {"trace", [unpack](std::span<const double> s) { return trace(unpack(s)).real(); }});
  // tr H^2 equals the squared Frobenius norm for Hermitian H.
  ms.push_back({"trace_sq", [unpack](std::span<const double> s) {
                  const double f = frobenius_norm(unpack(s));
                  return f * f;
                }});
  return ms;
}

FlowResult trivial_flow_result(const ComplexMatrix& h, const ComplexMatrix& deriv) {
  const std::size_t n = h.n();
  FlowResult res;
  res.final_l = 0.0;
  res.final_state = flatten_hermitian(h);
  TrajectorySample s;
  s.l = 0.0;
  s.state = res.final_state;
  s.derivative = flatten_hermitian(deriv);
  s.monitors = {off_diagonal_norm(h), trace(h).real(),
                frobenius_norm(h) * frobenius_norm(h)};
  res.trajectory.push_back(std::move(s));
  res.termination = Termination::ReachedLMax;
  return res;
}

}  // namespace

DenseHermitian::DenseHermitian(ComplexMatrix m) : m_(std::move(m)) {
  if (!all_finite(m_)) throw ContractViolation("DenseHermitian: non-finite entries");
  if (hermiticity_defect(m_) > kStructureTol * structure_scale(m_)) {
    throw ContractViolation("DenseHermitian: matrix is not Hermitian within tolerance");
  }
  for (std::size_t i = 0; i < m_.n(); ++i) {
    m_(i, i) = Complex(m_(i, i).real(), 0.0);
    for (std::size_t j = i + 1; j < m_.n(); ++j) {
      const Complex avg = 0.5 * (m_(i, j) + std::conj(m_(j, i)));
      m_(i, j) = avg;
      m_(j, i) = std::conj(avg);
    }
  }
}

AntiHermitianGenerator::AntiHermitianGenerator(ComplexMatrix m) : m_(std::move(m)) {
  if (!all_finite(m_)) throw ContractViolation("AntiHermitianGenerator: non-finite entries");
  if (anti_hermiticity_defect(m_) > kStructureTol * structure_scale(m_)) {
    throw ContractViolation(
        "AntiHermitianGenerator: matrix is not anti-Hermitian within tolerance");
  }
  for (std::size_t i = 0; i < m_.n(); ++i) {
    m_(i, i) = Complex(0.0, m_(i, i).imag());
    for (std::size_t j = i + 1; j < m_.n(); ++j) {
      const Complex avg = 0.5 * (m_(i, j) - std::conj(m_(j, i)));
      m_(i, j) = avg;
      m_(j, i) = -std::conj(avg);
    }
  }
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return subtract(multiply(a, b), multiply(b, a));
}

AntiHermitianGenerator wegner_generator(const DenseHermitian& h) {
  ComplexMatrix eta(h.n());
  wegner_from(h.matrix(), eta);
  return AntiHermitianGenerator(std::move(eta));
}

std::vector<double> flatten_hermitian(const ComplexMatrix& h) {
  std::vector<double> v(h.n() * h.n());
  flatten_hermitian_into(h, v);
  return v;
}

void unflatten_hermitian(std::span<const double> v, ComplexMatrix& out) {
  const std::size_t n = out.n();
  if (v.size() != n * n) throw ContractViolation("unflatten_hermitian: size mismatch");
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) out(i, i) = Complex(v[p++], 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double re = v[p++];
      const double im = v[p++];
      out(i, j) = Complex(re, im);
      out(j, i) = Complex(re, -im);
    }
}

std::vector<double> flatten_complex(const ComplexMatrix& m) {
  std::vector<double> v(2 * m.n() * m.n());
  flatten_complex_into(m, v);
  return v;
}

void unflatten_complex(std::span<const double> v, ComplexMatrix& out) {
  if (v.size() != 2 * out.n() * out.n()) {
    throw ContractViolation("unflatten_complex: size mismatch");
  }
  std::size_t p = 0;
  for (Complex& z : out.data()) {
    const double re = v[p++];
    const double im = v[p++];
    z = Complex(re, im);
  }
}

MatrixFlowOutcome flow_diagonalize(const DenseHermitian& h, const IntegratorConfig& config,
                                   bool track_unitary) {
  config.validate();
  const std::size_t n = h.n();
  const std::size_t hsize = n * n;
  const std::size_t usize = track_unitary ? 2 * n * n : 0;

  FlowProblem prob;
  prob.dimension = hsize + usize;
  prob.rhs = [n, hsize, track_unitary](double, std::span<const double> state,
                                       std::span<double> deriv) {
    ComplexMatrix hm(n);
    unflatten_hermitian(state.first(hsize), hm);
    ComplexMatrix eta(n);
    wegner_from(hm, eta);
    flatten_hermitian_into(commutator(eta, hm), deriv.first(hsize));
    if (track_unitary) {
      ComplexMatrix u(n);
      unflatten_complex(state.subspan(hsize), u);
      flatten_complex_into(multiply(eta, u), deriv.subspan(hsize));
    }
  };
  prob.monitors = matrix_monitors(n);
  prob.convergence_measure =
      ScalarMonitor{"offdiag_norm", [n, hsize](std::span<const double> s) {
                      ComplexMatrix hm(n);
                      unflatten_hermitian(s.first(hsize), hm);
                      return off_diagonal_norm(hm);
                    }};

  std::vector<double> initial = flatten_hermitian(h.matrix());
  if (track_unitary) {
    const std::vector<double> u0 = flatten_complex(ComplexMatrix::identity(n));
    initial.insert(initial.end(), u0.begin(), u0.end());
  }

  FlowResult flow = integrate_flow(prob, config, initial);

  ComplexMatrix hm(n);
  unflatten_hermitian(std::span<const double>(flow.final_state).first(hsize), hm);
  if (!all_finite(hm)) throw NumericalError("flow_diagonalize: flow left the finite domain");
  MatrixFlowOutcome out{std::move(flow), DenseHermitian(std::move(hm)), std::nullopt};
  if (track_unitary) {
    ComplexMatrix u(n);
    unflatten_complex(std::span<const double>(out.flow.final_state).subspan(hsize), u);
    out.unitary = std::move(u);
  }
  return out;
}

double suggested_l_max(const DenseHermitian& h) {
  // Off-diagonal decay rates scale like squared diagonal gaps; aim for about
  // 50 e-foldings of the slowest resolvable channel.
  const std::size_t n = h.n();
  double min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gap = h.matrix()(i, i).real() - h.matrix()(j, j).real();
      const double rate = gap * gap;
      if (rate > 1e-12) min_rate = std::min(min_rate, rate);
    }
  if (!std::isfinite(min_rate)) return 100.0;
  return std::clamp(50.0 / min_rate, 1.0, 1e5);
}

OneStepCutOutcome one_step_cut(const DenseHermitian& h, const AntiHermitianGenerator& r,
                               double theta_end, const IntegratorConfig& config) {
  if (h.n() != r.n()) throw ContractViolation("one_step_cut: dimension mismatch");
  if (!std::isfinite(theta_end)) throw ContractViolation("one_step_cut: theta_end not finite");
  config.validate();
  const std::size_t n = h.n();
  const std::size_t hsize = n * n;

  const ComplexMatrix e = matrix_exponential(scale(r.matrix(), Complex(theta_end, 0.0)));
  ComplexMatrix rotated = multiply(multiply(e, h.matrix()), adjoint(e));
  if (!all_finite(rotated)) throw NumericalError("one_step_cut: rotation overflowed");
  DenseHermitian hb(std::move(rotated));

  if (theta_end == 0.0) {
    return {hb, 0.0, trivial_flow_result(h.matrix(), commutator(r.matrix(), h.matrix()))};
  }

  // theta < 0 integrates the mirrored flow in s = -theta.
  const double sign = theta_end > 0.0 ? 1.0 : -1.0;
  FlowProblem prob;
  prob.dimension = hsize;
  prob.rhs = [n, sign, &r](double, std::span<const double> state, std::span<double> deriv) {
    ComplexMatrix hm(n);
    unflatten_hermitian(state, hm);
    ComplexMatrix dh = commutator(r.matrix(), hm);
    if (sign < 0.0) dh = scale(dh, Complex(-1.0, 0.0));
    flatten_hermitian_into(dh, deriv);
  };
  prob.monitors = matrix_monitors(n);

  IntegratorConfig cfg = config;
  cfg.l_max = std::abs(theta_end);
  cfg.convergence_threshold = 0.0;  // the linear flow always runs the full interval

  FlowResult flow = integrate_flow(prob, cfg, flatten_hermitian(h.matrix()));

  ComplexMatrix ha(n);
  unflatten_hermitian(flow.final_state, ha);
  const double gap = frobenius_norm(subtract(ha, hb.matrix()));

  return {std::move(hb), gap, std::move(flow)};
}

OneStepCutOutcome one_step_cut(const DenseHermitian& h, const AntiHermitianGenerator& r,
                               double theta_end) {
  return one_step_cut(h, r, theta_end, IntegratorConfig{});
}

ComplexMatrix solve_linear(ComplexMatrix a, ComplexMatrix b) {
  const std::size_t n = a.n();
  if (b.n() != n) throw ContractViolation("solve_linear: dimension mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double cand = std::abs(a(i, k));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) {
      throw NumericalError("solve_linear: singular matrix");
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(k, j), a(piv, j));
        std::swap(b(k, j), b(piv, j));
      }
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const Complex f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < n; ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t ii = n; ii-- > 0;) {
      Complex x = b(ii, col);
      for (std::size_t j = ii + 1; j < n; ++j) x -= a(ii, j) * b(j, col);
      b(ii, col) = x / a(ii, ii);
    }
  }
  return b;
}

ComplexMatrix matrix_exponential(const ComplexMatrix& a) {
  if (!all_finite(a)) throw NumericalError("matrix_exponential: non-finite input");
  const std::size_t n = a.n();
  if (n == 0) return ComplexMatrix(0);

  // Degree-13 Pade approximant; scaling threshold and coefficients are the
  // standard ones for double precision.
  constexpr double kTheta13 = 5.371920351148152;
  constexpr double kB[] = {64764752532480000.0,
                           32382376266240000.0,
                           7771770303897600.0,
                           1187353796428800.0,
                           129060195264000.0,
                           10559470521600.0,
                           670442572800.0,
                           33522128640.0,
                           1323241920.0,
                           40840800.0,
                           960960.0,
                           16380.0,
                           182.0,
                           1.0};

  const double nrm = one_norm(a);
  int squarings = 0;
  if (nrm > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / kTheta13)));
  }
  const ComplexMatrix as = scale(a, Complex(std::ldexp(1.0, -squarings), 0.0));

  const ComplexMatrix id = ComplexMatrix::identity(n);
  const ComplexMatrix a2 = multiply(as, as);
  const ComplexMatrix a4 = multiply(a2, a2);
  const ComplexMatrix a6 = multiply(a2, a4);

  auto axpy3 = [](double c6, const ComplexMatrix& m6, double c4, const ComplexMatrix& m4,
                  double c2, const ComplexMatrix& m2) {
    ComplexMatrix r(m6.n());
    for (std::size_t p = 0; p < r.data().size(); ++p) {
      r.data()[p] = c6 * m6.data()[p] + c4 * m4.data()[p] + c2 * m2.data()[p];
    }
    return r;
  };

  ComplexMatrix u = multiply(a6, axpy3(kB[13], a6, kB[11], a4, kB[9], a2));
  {
    const ComplexMatrix tail = axpy3(kB[7], a6, kB[5], a4, kB[3], a2);
    for (std::size_t p = 0; p < u.data().size(); ++p) u.data()[p] += tail.data()[p];
    for (std::size_t i = 0; i < n; ++i) u(i, i) += kB[1];
  }
  u = multiply(as, u);

  ComplexMatrix v = multiply(a6, axpy3(kB[12], a6, kB[10], a4, kB[8], a2));
  {
    const ComplexMatrix tail = axpy3(kB[6], a6, kB[4], a4, kB[2], a2);
    for (std::size_t p = 0; p < v.data().size(); ++p) v.data()[p] += tail.data()[p];
    for (std::size_t i = 0; i < n; ++i) v(i, i) += kB[0];
  }

  ComplexMatrix x = solve_linear(subtract(v, u), add(v, u));
  for (int s = 0; s < squarings; ++s) x = multiply(x, x);
  if (!all_finite(x)) throw NumericalError("matrix_exponential: overflow");
  return x;
}

ComplexMatrix accumulate_unitary(const std::function<ComplexMatrix(double)>& eta, double l_end,
                                 const IntegratorConfig& config) {
  if (!eta) throw ContractViolation("accumulate_unitary: generator callback required");
  if (!std::isfinite(l_end) || l_end <= 0.0) {
    throw ContractViolation("accumulate_unitary: l_end must be positive");
  }
  config.validate();
  const std::size_t n = eta(0.0).n();

  FlowProblem prob;
  prob.dimension = 2 * n * n;
  prob.rhs = [n, &eta](double l, std::span<const double> state, std::span<double> deriv) {
    ComplexMatrix u(n);
    unflatten_complex(state, u);
    const ComplexMatrix g = eta(l);
    if (g.n() != n) throw ContractViolation("accumulate_unitary: generator changed size");
    flatten_complex_into(multiply(g, u), deriv);
  };

  IntegratorConfig cfg = config;
  cfg.l_max = l_end;
  cfg.convergence_threshold = 0.0;

  const FlowResult res = integrate_flow(prob, cfg, flatten_complex(ComplexMatrix::identity(n)));
  if (res.termination == Termination::NumericalFailure) {
    throw NumericalError("accumulate_unitary: integration failed");
  }
  ComplexMatrix u(n);
  unflatten_complex(res.final_state, u);
  return u;
}

std::vector<double> reference_eigenvalues(const DenseHermitian& h) {
  const std::size_t n = h.n();
  ComplexMatrix a = h.matrix();
  const double tol = 1e-13 * std::max(1.0, frobenius_norm(a));
  constexpr int kMaxSweeps = 100;

  int sweep = 0;
  while (off_diagonal_norm(a) >= tol) {
    if (sweep++ == kMaxSweeps) {
      throw NumericalError("reference_eigenvalues: Jacobi sweeps exhausted");
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag < 1e-300) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (app - aqq) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::hypot(1.0, tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const Complex phase = apq / mag;

        // Columns first, rotated rows mirrored to keep exact hermiticity.
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const Complex kp = a(k, p);
          const Complex kq = a(k, q);
          a(k, p) = c * kp + s * std::conj(phase) * kq;
          a(k, q) = -s * phase * kp + c * kq;
          a(p, k) = std::conj(a(k, p));
          a(q, k) = std::conj(a(k, q));
        }
        const double shift = 2.0 * mag * c * s;
        a(p, p) = Complex(app * c * c + shift + aqq * s * s, 0.0);
        a(q, q) = Complex(app * s * s - shift + aqq * c * c, 0.0);
        a(p, q) = Complex(0.0, 0.0);
        a(q, p) = Complex(0.0, 0.0);
      }
    }
  }

  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i).real();
  std::sort(ev.begin(), ev.end());
  return ev;
}

std::string matrix_to_json(const ComplexMatrix& m) {
  JsonWriter w;
  w.begin_object();
  w.key("n").value(m.n());
  w.key("re").begin_array();
  for (const Complex& z : m.data()) w.value(z.real());
  w.end_array();
  w.key("im").begin_array();
  for (const Complex& z : m.data()) w.value(z.imag());
  w.end_array();
  w.end_object();
  return w.str();
}

ComplexMatrix matrix_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("matrix JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("matrix", "matrix JSON must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "n" && key != "re" && key != "im") {
      throw ValidationError(key, "unknown field '" + key + "' in matrix JSON");
    }
  }
  if (!j.contains("n") || !j["n"].is_number_integer()) {
    throw ValidationError("n", "matrix JSON requires integer field 'n'");
  }
  const std::int64_t ni = j["n"].get<std::int64_t>();
  if (ni < 1 || ni > 4096) throw ValidationError("n", "matrix size out of range");
  const std::size_t n = static_cast<std::size_t>(ni);
  auto read_plane = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != n * n) {
      throw ValidationError(key, std::string("field '") + key + "' must be an array of n*n numbers");
    }
    std::vector<double> vals;
    vals.reserve(n * n);
    for (const auto& x : j[key]) {
      if (!x.is_number()) {
        throw ValidationError(key, std::string("field '") + key + "' must contain only numbers");
      }
      const double v = x.get<double>();
      if (!std::isfinite(v)) {
        throw ValidationError(key, std::string("field '") + key + "' contains a non-finite value");
      }
      vals.push_back(v);
    }
    return vals;
  };
  const std::vector<double> re = read_plane("re");
  const std::vector<double> im = read_plane("im");
  ComplexMatrix m(n);
  for (std::size_t p = 0; p < n * n; ++p) m.data()[p] = Complex(re[p], im[p]);
  return m;
}

}  // namespace flowdiag
