// SPDX-License-Identifier: Apache-2.0
#include "stylepoint/parallel.hpp"

#include <cstdlib>
#include <string>

namespace stylepoint {

int configure_threads_from_env() {
#if defined(_OPENMP)
    if (const char *env = std::getenv("STYLEPOINT_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap > 0) {
                omp_set_num_threads(cap);
            }
        } catch (const std::exception &) {
            // malformed value: keep the runtime default
        }
    }
#endif
    return max_threads();
}

} // namespace stylepoint
