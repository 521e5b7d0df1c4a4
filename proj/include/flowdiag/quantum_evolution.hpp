#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "flowdiag/complex_matrix.hpp"
#include "flowdiag/flow_engine.hpp"

// Spin-1/2 chains: Zeeman term plus secular dipolar couplings. The deviation
// density matrix evolves under the Liouville equation; its spread across
// Pauli-string weights tracks how far correlations have grown.
namespace flowdiag::spins {

struct SpinSystem {
  std::size_t n = 1;          // number of spins; Hilbert dimension 2^n
  double omega0 = 0.0;        // Zeeman frequency
  std::vector<double> j;      // n*n coupling matrix, row-major

  double coupling(std::size_t a, std::size_t b) const { return j[a * n + b]; }

  // Throws ContractViolation unless 1 <= n <= 10 and j is an n*n symmetric
  // matrix with zero diagonal and finite entries. An empty j means no
  // couplings.
  void validate() const;
};

// H = omega0 sum_a Iz_a + sum_{a<b} J_ab (2 Iz_a Iz_b - (I+_a I-_b + I-_a I+_b)/2).
// Basis: bit a of the index is spin a, clear = up (Iz eigenvalue +1/2).
ComplexMatrix hamiltonian(const SpinSystem& sys);

// alpha * sum_a Ix_a, the traceless transverse deviation.
ComplexMatrix transverse_deviation(std::size_t n, double alpha);

// exp(-i H t) rho exp(+i H t).
ComplexMatrix exact_propagate(const ComplexMatrix& h, const ComplexMatrix& rho, double t);

// Liouville flow drho/dt = -i [H, rho] on the packed state (2 * 4^n reals).
// Monitors: |tr rho| and the squared Frobenius norm, both conserved.
FlowProblem liouville_problem(const ComplexMatrix& h);

// Heisenberg flow dA/dt = +i [H, A] for observables.
FlowProblem heisenberg_problem(const ComplexMatrix& h);

// Coefficients of sigma_x and sigma_y on each site when J = 0:
// {alpha/2 cos(omega0 t), alpha/2 sin(omega0 t)}.
std::pair<double, double> zeeman_pauli_coefficients(double alpha, double omega0, double t);

// Expansion coefficient tr(P_s rho) / 2^n for one Pauli string. Site a's
// operator is bits (2a, 2a+1) of `s`: 0 identity, 1 X, 2 Y, 3 Z.
Complex string_coefficient(const ComplexMatrix& rho, std::uint64_t s);

// Weight spectrum W[w] = sum over strings with w non-identity sites of
// |tr(P_s rho) / 2^n|^2, for w = 0..n. Both kernels share one grouped
// summation order, so the OpenMP split over groups is bitwise identical to
// the serial reference.
std::vector<double> order_spectrum(const ComplexMatrix& rho);
std::vector<double> order_spectrum_serial(const ComplexMatrix& rho);

}  // namespace flowdiag::spins
