#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace flowdiag {

using Complex = std::complex<double>;

// Dense square complex matrix, row-major. Desk scale (n up to a few hundred);
// no sparse storage.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t n) : n_(n), a_(n * n) {}

  static ComplexMatrix identity(std::size_t n);

  std::size_t n() const { return n_; }
  Complex& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  std::span<Complex> data() { return a_; }
  std::span<const Complex> data() const { return a_; }

  bool operator==(const ComplexMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<Complex> a_;
};

// C = A * B. The OpenMP kernel splits over rows; each row is computed in the
// same operation order as the serial reference, so both produce bitwise
// identical results.
ComplexMatrix multiply(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix multiply_serial(const ComplexMatrix& a, const ComplexMatrix& b);

ComplexMatrix add(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix subtract(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix scale(const ComplexMatrix& a, Complex factor);
ComplexMatrix adjoint(const ComplexMatrix& a);

Complex trace(const ComplexMatrix& a);
double frobenius_norm(const ComplexMatrix& a);
// Square root of the sum of squared magnitudes of off-diagonal entries.
double off_diagonal_norm(const ComplexMatrix& a);
// Maximum column sum of magnitudes (induced 1-norm).
double one_norm(const ComplexMatrix& a);
double max_abs(const ComplexMatrix& a);
bool all_finite(const ComplexMatrix& a);

double hermiticity_defect(const ComplexMatrix& a);       // max |a_ij - conj(a_ji)|
double anti_hermiticity_defect(const ComplexMatrix& a);  // max |a_ij + conj(a_ji)|

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  return multiply(a, b);
}
inline ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
  return add(a, b);
}
inline ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
  return subtract(a, b);
}
inline ComplexMatrix operator*(Complex s, const ComplexMatrix& a) { return scale(a, s); }
inline ComplexMatrix operator*(double s, const ComplexMatrix& a) { return scale(a, s); }

}  // namespace flowdiag
