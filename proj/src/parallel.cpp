#include "fineq/parallel.hpp"

#include <cstdlib>

#include <omp.h>

namespace fineq {

int max_threads() {
  if (const char* s = std::getenv("FINEQ_THREADS")) {
    const int v = std::atoi(s);
    if (v > 0) return v;
  }
  return omp_get_max_threads();
}

}  // namespace fineq
