#include "flowdiag/random_matrices.hpp"

#include <cmath>

namespace flowdiag {

DenseHermitian random_hermitian(std::size_t n, SeededRng& rng) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = Complex(rng.normal(), 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Complex z = rng.complex_normal() / std::sqrt(2.0);
      m(i, j) = z;
      m(j, i) = std::conj(z);
    }
  }
  return DenseHermitian(std::move(m));
}

DenseHermitian random_spread_hermitian(std::size_t n, SeededRng& rng, double coupling) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = Complex(static_cast<double>(i + 1) + 0.2 * rng.uniform(-1.0, 1.0), 0.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      const Complex z = coupling * (rng.complex_normal() / std::sqrt(2.0));
      m(i, j) = z;
      m(j, i) = std::conj(z);
    }
  }
  return DenseHermitian(std::move(m));
}

AntiHermitianGenerator random_anti_hermitian(std::size_t n, SeededRng& rng, double magnitude) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = Complex(0.0, magnitude * rng.normal());
    for (std::size_t j = i + 1; j < n; ++j) {
      const Complex z = magnitude * (rng.complex_normal() / std::sqrt(2.0));
      m(i, j) = z;
      m(j, i) = -std::conj(z);
    }
  }
  return AntiHermitianGenerator(std::move(m));
}

}  // namespace flowdiag
