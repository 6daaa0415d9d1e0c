// SPDX-License-Identifier: Apache-2.0
#pragma once

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace stylepoint {

/// Applies the STYLEPOINT_THREADS cap (if set) to the OpenMP runtime.
/// Returns the thread count kernels will use afterwards.
int configure_threads_from_env();

inline int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace stylepoint
