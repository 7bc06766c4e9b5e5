#pragma once

namespace cfolio {

// Applies the COPULA_FOLIO_THREADS environment variable, when set and valid,
// as a cap on the OpenMP thread count. Call once at process start.
void apply_thread_cap_from_env();

// Current OpenMP thread budget.
int effective_threads();

}  // namespace cfolio
