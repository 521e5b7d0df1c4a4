#pragma once

#include <cstddef>

namespace flowdiag::par {

// Thread cap for all OpenMP regions in the library. Resolution order:
// set_thread_cap() override, then FLOWDIAG_THREADS, then omp_get_max_threads().
// Returns 1 when OpenMP is not compiled in.
int thread_cap();

// Programmatic override; 0 restores the environment-derived value.
void set_thread_cap(int n);

// True when the library was built with OpenMP.
bool openmp_enabled();

}  // namespace flowdiag::par
