#pragma once

namespace fineq {

/// Thread count for the OpenMP kernels. FINEQ_THREADS, when set to a
/// positive integer, caps it; otherwise the OpenMP default applies.
/// Re-read on every call so tests can flip the variable at runtime.
int max_threads();

}  // namespace fineq
