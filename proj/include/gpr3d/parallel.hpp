#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gpr3d {

/// Sets the OpenMP worker count used by all kernels. Every parallel loop
/// in this project assigns disjoint output elements to threads and keeps
/// a fixed accumulation order inside each element, so results are
/// bit-identical for any worker count.
inline void set_workers(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace gpr3d
