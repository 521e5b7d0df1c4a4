#include "flowdiag/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowdiag::par {

namespace {

std::atomic<int> g_override{0};

int env_threads() {
  const char* env = std::getenv("FLOWDIAG_THREADS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return n > 0 ? n : 0;
}

}  // namespace

int thread_cap() {
#ifdef _OPENMP
  const int forced = g_override.load();
  if (forced > 0) return forced;
  static const int from_env = env_threads();
  const int hw = omp_get_max_threads();
  if (from_env > 0 && from_env < hw) return from_env;
  return hw;
#else
  return 1;
#endif
}

void set_thread_cap(int n) { g_override.store(n > 0 ? n : 0); }

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace flowdiag::par
