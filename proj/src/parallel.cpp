#include "hypolab/parallel.hpp"

namespace hypolab {

ExecPolicy& exec_policy() {
    static ExecPolicy policy;
    return policy;
}

void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace hypolab
