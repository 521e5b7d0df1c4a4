#include "flowdiag/quantum_evolution.hpp"

#include <bit>
#include <cmath>

#include "flowdiag/errors.hpp"
#include "flowdiag/matrix_flow.hpp"
#include "flowdiag/parallel.hpp"

namespace flowdiag::spins {

namespace {

constexpr std::size_t kMaxSpins = 10;

std::size_t spin_count(const ComplexMatrix& rho) {
  const std::size_t dim = rho.n();
  if (dim == 0 || !std::has_single_bit(dim)) {
    throw ContractViolation("spins: matrix dimension must be a power of two");
  }
  const std::size_t n = static_cast<std::size_t>(std::countr_zero(dim));
  if (n < 1 || n > kMaxSpins) throw ContractViolation("spins: unsupported spin count");
  return n;
}

double z_half(std::uint64_t state, std::size_t site) {
  return ((state >> site) & 1u) ? -0.5 : 0.5;
}

// Shared Liouville/Heisenberg plumbing; `sign` picks -i (states) or +i
// (observables).
FlowProblem commutator_problem(const ComplexMatrix& h, double sign) {
  const std::size_t dim = h.n();
  FlowProblem prob;
  prob.dimension = 2 * dim * dim;
  prob.rhs = [h, sign, dim](double, std::span<const double> s, std::span<double> d) {
    ComplexMatrix rho(dim);
    unflatten_complex(s, rho);
    const ComplexMatrix c = scale(commutator(h, rho), Complex(0.0, sign));
    std::size_t p = 0;
    for (const Complex& z : c.data()) {
      d[p++] = z.real();
      d[p++] = z.imag();
    }
  };
  prob.monitors = {
      {"trace_check",
       [dim](std::span<const double> s) {
         ComplexMatrix rho(dim);
         unflatten_complex(s, rho);
         return std::abs(trace(rho));
       }},
      {"purity_check",
       [dim](std::span<const double> s) {
         ComplexMatrix rho(dim);
         unflatten_complex(s, rho);
         const double f = frobenius_norm(rho);
         return f * f;
       }},
  };
  return prob;
}

struct StringTerm {
  double weight_sq;  // |tr(P_s rho) / 2^n|^2
  std::size_t weight;
};

StringTerm string_term(const ComplexMatrix& rho, std::uint64_t s, std::size_t n) {
  std::uint64_t flip = 0;   // sites carrying X or Y
  std::uint64_t signs = 0;  // sites carrying Y or Z
  std::size_t n_y = 0;
  std::size_t weight = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const unsigned op = (s >> (2 * a)) & 3u;
    if (op == 0) continue;
    ++weight;
    if (op == 1) flip |= std::uint64_t(1) << a;
    if (op == 2) {
      flip |= std::uint64_t(1) << a;
      signs |= std::uint64_t(1) << a;
      ++n_y;
    }
    if (op == 3) signs |= std::uint64_t(1) << a;
  }

  const std::uint64_t dim = std::uint64_t(1) << n;
  Complex sum(0.0, 0.0);
  for (std::uint64_t r = 0; r < dim; ++r) {
    const Complex v = rho(r ^ flip, r);
    sum += (std::popcount(r & signs) & 1u) ? -v : v;
  }
  // Each Y contributes a factor -i on the (up, down) entry.
  static constexpr Complex kYPhase[4] = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
  const Complex coeff = kYPhase[n_y & 3u] * sum / static_cast<double>(dim);
  return {std::norm(coeff), weight};
}

// Both kernels accumulate per prefix-group bins and reduce in group order, so
// the arithmetic is identical whether or not the group loop is threaded.
std::vector<double> order_spectrum_impl(const ComplexMatrix& rho, bool threaded) {
  const std::size_t n = spin_count(rho);
  const std::size_t group_sites = std::min<std::size_t>(n, 6);
  const std::uint64_t groups = std::uint64_t(1) << (2 * group_sites);
  const std::uint64_t per_group = std::uint64_t(1) << (2 * (n - group_sites));

  std::vector<double> bins(groups * (n + 1), 0.0);
  const int threads = threaded ? par::thread_cap() : 1;
#pragma omp parallel for schedule(static) num_threads(threads) if (threaded && threads > 1)
  for (std::uint64_t g = 0; g < groups; ++g) {
    double* local = &bins[g * (n + 1)];
    const std::uint64_t base = g * per_group;
    for (std::uint64_t k = 0; k < per_group; ++k) {
      const StringTerm t = string_term(rho, base + k, n);
      local[t.weight] += t.weight_sq;
    }
  }

  std::vector<double> w(n + 1, 0.0);
  for (std::uint64_t g = 0; g < groups; ++g) {
    for (std::size_t k = 0; k <= n; ++k) w[k] += bins[g * (n + 1) + k];
  }
  return w;
}

}  // namespace

void SpinSystem::validate() const {
  if (n < 1 || n > kMaxSpins) throw ContractViolation("spins: n must be in [1, 10]");
  if (!std::isfinite(omega0)) throw ContractViolation("spins: omega0 must be finite");
  if (j.empty()) return;
  if (j.size() != n * n) throw ContractViolation("spins: coupling matrix must be n*n");
  for (std::size_t a = 0; a < n; ++a) {
    if (coupling(a, a) != 0.0) {
      throw ContractViolation("spins: coupling matrix must have zero diagonal");
    }
    for (std::size_t b = 0; b < n; ++b) {
      if (!std::isfinite(coupling(a, b)) || coupling(a, b) != coupling(b, a)) {
        throw ContractViolation("spins: coupling matrix must be finite and symmetric");
      }
    }
  }
}

ComplexMatrix hamiltonian(const SpinSystem& sys) {
  sys.validate();
  const std::uint64_t dim = std::uint64_t(1) << sys.n;
  ComplexMatrix h(dim);
  const bool coupled = !sys.j.empty();
  for (std::uint64_t c = 0; c < dim; ++c) {
    double diag = 0.0;
    for (std::size_t a = 0; a < sys.n; ++a) diag += sys.omega0 * z_half(c, a);
    if (coupled) {
      for (std::size_t a = 0; a < sys.n; ++a) {
        for (std::size_t b = a + 1; b < sys.n; ++b) {
          const double jab = sys.coupling(a, b);
          if (jab == 0.0) continue;
          diag += 2.0 * jab * z_half(c, a) * z_half(c, b);
          // Flip-flop connects anti-aligned pairs with amplitude -J/2.
          if (((c >> a) & 1u) != ((c >> b) & 1u)) {
            const std::uint64_t flipped =
                c ^ ((std::uint64_t(1) << a) | (std::uint64_t(1) << b));
            h(flipped, c) += Complex(-0.5 * jab, 0.0);
          }
        }
      }
    }
    h(c, c) += Complex(diag, 0.0);
  }
  return h;
}

ComplexMatrix transverse_deviation(std::size_t n, double alpha) {
  if (n < 1 || n > kMaxSpins) throw ContractViolation("spins: n must be in [1, 10]");
  const std::uint64_t dim = std::uint64_t(1) << n;
  ComplexMatrix rho(dim);
  for (std::uint64_t c = 0; c < dim; ++c) {
    for (std::size_t a = 0; a < n; ++a) {
      rho(c ^ (std::uint64_t(1) << a), c) += Complex(0.5 * alpha, 0.0);
    }
  }
  return rho;
}

ComplexMatrix exact_propagate(const ComplexMatrix& h, const ComplexMatrix& rho, double t) {
  if (h.n() != rho.n()) throw ContractViolation("exact_propagate: dimension mismatch");
  const ComplexMatrix u = matrix_exponential(scale(h, Complex(0.0, -t)));
  return multiply(multiply(u, rho), adjoint(u));
}

FlowProblem liouville_problem(const ComplexMatrix& h) {
  spin_count(h);
  return commutator_problem(h, -1.0);
}

FlowProblem heisenberg_problem(const ComplexMatrix& h) {
  spin_count(h);
  return commutator_problem(h, 1.0);
}

std::pair<double, double> zeeman_pauli_coefficients(double alpha, double omega0, double t) {
  return {0.5 * alpha * std::cos(omega0 * t), 0.5 * alpha * std::sin(omega0 * t)};
}

Complex string_coefficient(const ComplexMatrix& rho, std::uint64_t s) {
  const std::size_t n = spin_count(rho);
  if ((s >> (2 * n)) != 0) {
    throw ContractViolation("string_coefficient: string index out of range");
  }
  std::uint64_t flip = 0, signs = 0;
  std::size_t n_y = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const unsigned op = (s >> (2 * a)) & 3u;
    if (op == 1) flip |= std::uint64_t(1) << a;
    if (op == 2) {
      flip |= std::uint64_t(1) << a;
      signs |= std::uint64_t(1) << a;
      ++n_y;
    }
    if (op == 3) signs |= std::uint64_t(1) << a;
  }
  const std::uint64_t dim = std::uint64_t(1) << n;
  Complex sum(0.0, 0.0);
  for (std::uint64_t r = 0; r < dim; ++r) {
    const Complex v = rho(r ^ flip, r);
    sum += (std::popcount(r & signs) & 1u) ? -v : v;
  }
  static constexpr Complex kYPhase[4] = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
  return kYPhase[n_y & 3u] * sum / static_cast<double>(dim);
}

std::vector<double> order_spectrum(const ComplexMatrix& rho) {
  return order_spectrum_impl(rho, true);
}

std::vector<double> order_spectrum_serial(const ComplexMatrix& rho) {
  return order_spectrum_impl(rho, false);
}

}  // namespace flowdiag::spins
