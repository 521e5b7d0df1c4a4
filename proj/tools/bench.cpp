// Compares the OpenMP kernels against their serial reference implementations:
// dense complex matrix multiply, the Pauli-string order spectrum, and a full
// scenario sweep. Outputs are required to match bitwise before a timing is
// reported; a mismatch is a hard failure.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "flowdiag/complex_matrix.hpp"
#include "flowdiag/parallel.hpp"
#include "flowdiag/quantum_evolution.hpp"
#include "flowdiag/random_matrices.hpp"
#include "flowdiag/rng.hpp"
#include "flowdiag/scenario.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double time_best(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    const std::chrono::duration<double> dt = Clock::now() - t0;
    best = std::min(best, dt.count());
  }
  return best;
}

void report(const char* name, double serial_s, double parallel_s, bool match) {
  std::printf("%-16s serial %9.4f s   parallel %9.4f s   speedup %5.2fx   %s\n", name,
              serial_s, parallel_s, serial_s / parallel_s, match ? "outputs match" : "MISMATCH");
}

bool bench_multiply(std::size_t n, int reps) {
  flowdiag::SeededRng rng(12);
  const flowdiag::ComplexMatrix a = flowdiag::random_hermitian(n, rng).matrix();
  const flowdiag::ComplexMatrix b = flowdiag::random_hermitian(n, rng).matrix();
  flowdiag::ComplexMatrix ref(n), par(n);
  const double ts = time_best(reps, [&] { ref = flowdiag::multiply_serial(a, b); });
  const double tp = time_best(reps, [&] { par = flowdiag::multiply(a, b); });
  bool match = true;
  for (std::size_t i = 0; i < n && match; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (std::memcmp(&ref(i, j), &par(i, j), sizeof(flowdiag::Complex)) != 0) {
        match = false;
        break;
      }
  report("matmul", ts, tp, match);
  return match;
}

bool bench_order_spectrum(std::size_t n_spins, int reps) {
  flowdiag::spins::SpinSystem sys;
  sys.n = n_spins;
  sys.omega0 = 0.4;
  sys.j.assign(n_spins * n_spins, 0.0);
  for (std::size_t a = 0; a + 1 < n_spins; ++a) {
    sys.j[a * n_spins + a + 1] = 0.3;
    sys.j[(a + 1) * n_spins + a] = 0.3;
  }
  const flowdiag::ComplexMatrix h = flowdiag::spins::hamiltonian(sys);
  const flowdiag::ComplexMatrix rho = flowdiag::spins::exact_propagate(
      h, flowdiag::spins::transverse_deviation(n_spins, 1.0), 0.8);
  std::vector<double> ref, par;
  const double ts = time_best(reps, [&] { ref = flowdiag::spins::order_spectrum_serial(rho); });
  const double tp = time_best(reps, [&] { par = flowdiag::spins::order_spectrum(rho); });
  const bool match =
      ref.size() == par.size() &&
      std::memcmp(ref.data(), par.data(), ref.size() * sizeof(double)) == 0;
  report("order_spectrum", ts, tp, match);
  return match;
}

bool bench_sweep(int half_grid, int reps) {
  std::string scenario = R"({"model": "quadratic", "method": "both", "g0": [)";
  for (int i = 0; i < half_grid; ++i) {
    if (i) scenario += ", ";
    scenario += std::to_string(0.05 + 0.9 * i / half_grid);
  }
  scenario += R"(], "f0": [1.0, 1.5]})";
  std::string ref, par;
  const double ts = time_best(
      reps, [&] { ref = flowdiag::scenario::sweep_scenario_text_serial(scenario).csv; });
  const double tp =
      time_best(reps, [&] { par = flowdiag::scenario::sweep_scenario_text(scenario).csv; });
  report("sweep", ts, tp, ref == par);
  return ref == par;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  std::printf("threads: %d (OpenMP %s; FLOWDIAG_THREADS caps the pool)\n",
              flowdiag::par::thread_cap(),
              flowdiag::par::openmp_enabled() ? "enabled" : "disabled");
  bool ok = true;
  if (quick) {
    ok &= bench_multiply(96, 1);
    ok &= bench_order_spectrum(6, 1);
    ok &= bench_sweep(6, 1);
  } else {
    ok &= bench_multiply(256, 3);
    ok &= bench_order_spectrum(8, 3);
    ok &= bench_sweep(40, 2);
  }
  return ok ? 0 : 1;
}
