#pragma once

#include <exception>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dip {

/// Runs body(i) for i in [0, count). With parallel = true the iterations run
/// under OpenMP; each iteration must only write its own slots, so serial and
/// parallel execution produce identical results. Exceptions are captured per
/// agent and the lowest-index one is rethrown, keeping error reporting
/// independent of scheduling.
template <typename F>
void for_each_agent(int count, bool parallel, F&& body) {
#ifdef _OPENMP
  if (parallel && count > 1) {
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (int i = 0; i < count; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
    }
    return;
  }
#else
  (void)parallel;
#endif
  for (int i = 0; i < count; ++i) body(i);
}

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

}  // namespace dip
