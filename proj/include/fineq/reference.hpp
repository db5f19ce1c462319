#pragma once

#include "fineq/types.hpp"

namespace fineq {

/// Dense float matmul Y = A * B with double accumulation. Parallelized
/// over output rows only, so each element's k-order sum is fixed and the
/// result does not depend on the thread count.
FloatTensor reference_matmul(const FloatTensor& a, const FloatTensor& b);

/// Norm-wise relative error max|y - ref| / max|ref|. Zero reference with
/// zero difference gives 0; zero reference otherwise gives infinity.
double max_rel_error(const FloatTensor& y, const FloatTensor& ref);

namespace serial {
FloatTensor reference_matmul(const FloatTensor& a, const FloatTensor& b);
}  // namespace serial

}  // namespace fineq
