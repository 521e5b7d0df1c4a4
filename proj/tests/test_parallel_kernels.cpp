// The OpenMP kernels must be bitwise-identical to their serial references
// regardless of the thread count; scheduling is fixed so partial sums and row
// ownership never move between threads.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>

#include "doctest.h"
#include "flowdiag/complex_matrix.hpp"
#include "flowdiag/parallel.hpp"
#include "flowdiag/quantum_evolution.hpp"
#include "flowdiag/random_matrices.hpp"
#include "flowdiag/rng.hpp"
#include "flowdiag/scenario.hpp"

using namespace flowdiag;

namespace {

struct ThreadCapGuard {
  explicit ThreadCapGuard(int n) { par::set_thread_cap(n); }
  ~ThreadCapGuard() { par::set_thread_cap(0); }
};

bool bitwise_equal(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.n() != b.n()) return false;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j)
      if (std::memcmp(&a(i, j), &b(i, j), sizeof(Complex)) != 0) return false;
  return true;
}

}  // namespace

TEST_CASE("thread cap override wins over the environment") {
  ThreadCapGuard guard(3);
  CHECK(par::thread_cap() == 3);
}

TEST_CASE("matrix multiply matches its serial reference bitwise") {
  ThreadCapGuard guard(4);
  SeededRng rng(77);
  // Above the dispatch threshold so the parallel path actually runs.
  const ComplexMatrix a = random_hermitian(64, rng).matrix();
  const ComplexMatrix b = random_hermitian(64, rng).matrix();
  CHECK(bitwise_equal(multiply(a, b), multiply_serial(a, b)));
}

TEST_CASE("order spectrum matches its serial reference bitwise") {
  ThreadCapGuard guard(4);
  spins::SpinSystem sys;
  sys.n = 7;
  sys.omega0 = 0.9;
  sys.j.assign(49, 0.0);
  for (std::size_t a = 0; a + 1 < 7; ++a) {
    sys.j[a * 7 + a + 1] = 0.5;
    sys.j[(a + 1) * 7 + a] = 0.5;
  }
  const ComplexMatrix h = spins::hamiltonian(sys);
  const ComplexMatrix rho = spins::exact_propagate(h, spins::transverse_deviation(7, 1.0), 1.3);
  const auto par_w = spins::order_spectrum(rho);
  const auto ser_w = spins::order_spectrum_serial(rho);
  REQUIRE(par_w.size() == ser_w.size());
  CHECK(std::memcmp(par_w.data(), ser_w.data(), par_w.size() * sizeof(double)) == 0);
}

TEST_CASE("sweep output is identical bytes under a forced thread pool") {
  ThreadCapGuard guard(4);
  const char* scenario = R"({"model": "threeboson", "method": "both",
                            "beta1": [0.6, 1.0, 1.4, 1.9],
                            "beta2": [0.8, 1.2, 1.7],
                            "psi1": [0.2, 0.1], "psi2": [-0.1, 0.3], "phi0": [0.05, 0.0]})";
  const auto par_csv = scenario::sweep_scenario_text(scenario).csv;
  const auto ser_csv = scenario::sweep_scenario_text_serial(scenario).csv;
  CHECK(par_csv == ser_csv);
  CHECK(par_csv.substr(0, par_csv.find('\n')) ==
        "beta1,beta2,fe_phi_re,fe_phi_im,cut_phi_re,cut_phi_im,shift_ratio");
}
