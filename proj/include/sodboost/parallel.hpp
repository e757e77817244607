#pragma once

#include <cstdint>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sodboost {

// Worker count for data-parallel loops. SODBOOST_THREADS overrides, 0 keeps
// the OpenMP default. Parallel regions only ever split independent output
// elements; every reduction stays sequential per element, so results are
// identical for any thread count.
inline int thread_count() {
#ifdef _OPENMP
    static const int n = [] {
        if (const char* env = std::getenv("SODBOOST_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        return omp_get_max_threads();
    }();
    return n;
#else
    return 1;
#endif
}

template <typename F>
void parallel_for(int64_t n, F&& body) {
#ifdef _OPENMP
    if (n > 1 && thread_count() > 1) {
#pragma omp parallel for schedule(static) num_threads(thread_count())
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace sodboost
