#include "flowdiag/complex_matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "flowdiag/errors.hpp"
#include "flowdiag/parallel.hpp"

namespace flowdiag {

namespace {

// Rows below this size are not worth spawning a team for.
constexpr std::size_t kParallelDim = 48;

void require_same_square(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
  if (a.n() != b.n()) {
    throw ContractViolation(std::string(what) + ": dimension mismatch");
  }
}

// One output row of C = A * B, accumulated in k-major order so every element
// sees the identical sequence of fused operations regardless of threading.
void multiply_row(std::size_t i, const ComplexMatrix& a, const ComplexMatrix& b,
                  ComplexMatrix& c) {
  const std::size_t n = a.n();
  Complex* crow = &c(i, 0);
  for (std::size_t j = 0; j < n; ++j) crow[j] = Complex(0.0, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex aik = a(i, k);
    const Complex* brow = &b(k, 0);
    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

}  // namespace

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = Complex(1.0, 0.0);
  return m;
}

ComplexMatrix multiply_serial(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "multiply");
  ComplexMatrix c(a.n());
  for (std::size_t i = 0; i < a.n(); ++i) multiply_row(i, a, b, c);
  return c;
}

ComplexMatrix multiply(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "multiply");
  const std::size_t n = a.n();
  ComplexMatrix c(n);
  const int threads = par::thread_cap();
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (n >= kParallelDim && threads > 1)
  for (std::size_t i = 0; i < n; ++i) {
    multiply_row(i, a, b, c);
  }
  return c;
}

ComplexMatrix add(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "add");
  ComplexMatrix c(a.n());
  for (std::size_t p = 0; p < a.data().size(); ++p) c.data()[p] = a.data()[p] + b.data()[p];
  return c;
}

ComplexMatrix subtract(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "subtract");
  ComplexMatrix c(a.n());
  for (std::size_t p = 0; p < a.data().size(); ++p) c.data()[p] = a.data()[p] - b.data()[p];
  return c;
}

ComplexMatrix scale(const ComplexMatrix& a, Complex factor) {
  ComplexMatrix c(a.n());
  for (std::size_t p = 0; p < a.data().size(); ++p) c.data()[p] = factor * a.data()[p];
  return c;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
  ComplexMatrix c(a.n());
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j) c(j, i) = std::conj(a(i, j));
  return c;
}

Complex trace(const ComplexMatrix& a) {
  Complex t(0.0, 0.0);
  for (std::size_t i = 0; i < a.n(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const ComplexMatrix& a) {
  double s = 0.0;
  for (const Complex& z : a.data()) s += std::norm(z);
  return std::sqrt(s);
}

double off_diagonal_norm(const ComplexMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

double one_norm(const ComplexMatrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.n(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.n(); ++i) col += std::abs(a(i, j));
    best = std::max(best, col);
  }
  return best;
}

double max_abs(const ComplexMatrix& a) {
  double best = 0.0;
  for (const Complex& z : a.data()) best = std::max(best, std::abs(z));
  return best;
}

bool all_finite(const ComplexMatrix& a) {
  for (const Complex& z : a.data())
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

double hermiticity_defect(const ComplexMatrix& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = i; j < a.n(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
  return worst;
}

double anti_hermiticity_defect(const ComplexMatrix& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = i; j < a.n(); ++j)
      worst = std::max(worst, std::abs(a(i, j) + std::conj(a(j, i))));
  return worst;
}

}  // namespace flowdiag
