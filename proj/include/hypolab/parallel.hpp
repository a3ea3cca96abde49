#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hypolab {

/// Global switch between the OpenMP kernels and the serial reference path.
/// Tests flip it to check that both paths produce bitwise-identical results;
/// the bench tool flips it to measure speedup. Reductions are organized so
/// the result does not depend on the thread count (disjoint writes, or
/// per-slot partial results combined in a fixed serial order).
struct ExecPolicy {
    bool parallel = true;
};

ExecPolicy& exec_policy();

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_thread_count(int n);

}  // namespace hypolab
