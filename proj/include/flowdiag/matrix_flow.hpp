#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowdiag/complex_matrix.hpp"
#include "flowdiag/flow_engine.hpp"

namespace flowdiag {

// Hermitian matrix. Construction checks h_ij = conj(h_ji) to within 1e-12
// (relative to the largest entry when that exceeds one) and then symmetrizes
// exactly, so the stored matrix satisfies the invariant to the last bit.
class DenseHermitian {
 public:
  explicit DenseHermitian(ComplexMatrix m);
  const ComplexMatrix& matrix() const { return m_; }
  std::size_t n() const { return m_.n(); }

 private:
  ComplexMatrix m_;
};

// Anti-Hermitian matrix, same policy with r_ij = -conj(r_ji).
class AntiHermitianGenerator {
 public:
  explicit AntiHermitianGenerator(ComplexMatrix m);
  const ComplexMatrix& matrix() const { return m_; }
  std::size_t n() const { return m_.n(); }

 private:
  ComplexMatrix m_;
};

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

// Generator eta = [diag(H), H]: entry (i, j) is (h_ii - h_jj) * h_ij.
AntiHermitianGenerator wegner_generator(const DenseHermitian& h);

// Real packing of a Hermitian matrix: n diagonal entries, then the strict
// upper triangle row by row as (re, im) pairs. n*n reals total.
std::vector<double> flatten_hermitian(const ComplexMatrix& h);
void unflatten_hermitian(std::span<const double> v, ComplexMatrix& out);

// Real packing of a general complex matrix: row-major (re, im) pairs,
// 2*n*n reals.
std::vector<double> flatten_complex(const ComplexMatrix& m);
void unflatten_complex(std::span<const double> v, ComplexMatrix& out);

struct MatrixFlowOutcome {
  FlowResult flow;           // states are flattened H (plus U when tracked)
  DenseHermitian final_h;
  std::optional<ComplexMatrix> unitary;  // solves dU/dl = eta(l) U, U(0) = 1
};

// Double-bracket flow dH/dl = [eta(H), H] with the generator above. Monitors
// recorded per sample: off-diagonal norm, tr H, tr H^2. The off-diagonal norm
// is the convergence measure.
MatrixFlowOutcome flow_diagonalize(const DenseHermitian& h, const IntegratorConfig& config,
                                   bool track_unitary = false);

// Step count heuristic for the flow above: decay rates scale like squared
// level spacings, so the slowest channel sets the horizon.
double suggested_l_max(const DenseHermitian& h);

struct OneStepCutOutcome {
  DenseHermitian h;       // conjugation route exp(theta R) H exp(-theta R)
  double route_gap;       // Frobenius distance between the two routes
  FlowResult ode_flow;    // trajectory of dH/dtheta = [R, H]
};

// Fixed-generator rotation by theta_end, computed two ways: integrating the
// linear flow and exact conjugation with the matrix exponential. The
// conjugation result is authoritative; route_gap reports the disagreement.
OneStepCutOutcome one_step_cut(const DenseHermitian& h, const AntiHermitianGenerator& r,
                               double theta_end, const IntegratorConfig& config);
OneStepCutOutcome one_step_cut(const DenseHermitian& h, const AntiHermitianGenerator& r,
                               double theta_end);

// exp(A) by scaling and squaring with a degree-13 Pade approximant.
// Throws NumericalError on overflow or a singular Pade denominator.
ComplexMatrix matrix_exponential(const ComplexMatrix& a);

// Solve A X = B with partial-pivot LU. Throws NumericalError when a pivot
// vanishes.
ComplexMatrix solve_linear(ComplexMatrix a, ComplexMatrix b);

// Integrate dU/dl = eta(l) U from the identity up to l_end with a caller
// supplied generator field.
ComplexMatrix accumulate_unitary(const std::function<ComplexMatrix(double)>& eta, double l_end,
                                 const IntegratorConfig& config);

// Eigenvalues by cyclic complex Jacobi rotations, ascending. Independent of
// the flow code paths; used as the oracle in tests. Iterates until the
// off-diagonal norm falls below 1e-13 (scaled by the Frobenius norm when that
// exceeds one); throws NumericalError if 100 sweeps do not get there.
std::vector<double> reference_eigenvalues(const DenseHermitian& h);

// Serialization: {"n": int, "re": [row-major], "im": [row-major]}.
std::string matrix_to_json(const ComplexMatrix& m);
ComplexMatrix matrix_from_json_text(std::string_view text);

}  // namespace flowdiag
