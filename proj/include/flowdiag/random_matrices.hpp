#pragma once

#include "flowdiag/complex_matrix.hpp"
#include "flowdiag/matrix_flow.hpp"
#include "flowdiag/rng.hpp"

namespace flowdiag {

// Gaussian Hermitian matrix: real normal diagonal, complex normal upper
// triangle with unit expected squared magnitude.
DenseHermitian random_hermitian(std::size_t n, SeededRng& rng);

// Hermitian matrix built for fast double-bracket convergence: diagonal close
// to 1..n (so level gaps stay near one) plus off-diagonal entries of the
// given magnitude scale.
DenseHermitian random_spread_hermitian(std::size_t n, SeededRng& rng, double coupling);

AntiHermitianGenerator random_anti_hermitian(std::size_t n, SeededRng& rng, double magnitude);

}  // namespace flowdiag
