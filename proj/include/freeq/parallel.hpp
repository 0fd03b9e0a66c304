// freeq - parallel.hpp
// OpenMP thread control and a deterministic parallel-for helper.
//
// Every parallel kernel in this project writes each output slot from exactly
// one loop iteration, so results are bitwise identical for any thread count.

#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace freeq::parallel {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Parallel loop over [0, n). fn must only write state owned by iteration i.
template <typename Fn>
inline void parallel_for(std::int64_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
    for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace freeq::parallel
