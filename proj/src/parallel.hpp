#pragma once

#include <exception>

#ifdef DSQP_HAVE_OPENMP
#include <omp.h>
#endif

namespace dsqp::detail {

// Runs body(i) for i in [0, n), across OpenMP threads when requested. The first
// exception thrown by any iteration is rethrown on the calling thread.
template <class F>
void for_each_index(int n, bool parallel, F&& body) {
#ifdef DSQP_HAVE_OPENMP
  if (parallel && n > 1) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
#pragma omp critical(dsqp_for_each_error)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  (void)parallel;
  for (int i = 0; i < n; ++i) body(i);
}

}  // namespace dsqp::detail
