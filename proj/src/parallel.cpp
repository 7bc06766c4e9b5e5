#include "cfolio/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cfolio {

void apply_thread_cap_from_env() {
#ifdef _OPENMP
    const char* raw = std::getenv("COPULA_FOLIO_THREADS");
    if (raw == nullptr) return;
    try {
        const int cap = std::stoi(std::string(raw));
        if (cap >= 1 && cap < omp_get_max_threads()) {
            omp_set_num_threads(cap);
        }
    } catch (const std::exception&) {
        // Unparseable value: leave the default alone.
    }
#endif
}

int effective_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace cfolio
