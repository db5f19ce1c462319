#pragma once

#include "fineq/types.hpp"

namespace fineq {

/// Uniform symmetric per-channel grid at b bits: s = max|w| / (2^(b-1)-1),
/// q = clamp(round(w/s), -(2^(b-1)-1), 2^(b-1)-1), value = q*s.
/// An all-zero channel reproduces exactly. b in [2, 8].
FloatTensor uniform_quantize(const FloatTensor& t, int bits);

/// Round-to-nearest asymmetric per-row grid at b bits:
/// scale = (max-min)/(2^b-1), zero_point = round(-min/scale),
/// q = clamp(round(w/scale)+zero_point, 0, 2^b-1),
/// value = (q-zero_point)*scale. A constant row reproduces exactly.
FloatTensor rtn_quantize(const FloatTensor& t, int bits);

namespace serial {
FloatTensor uniform_quantize(const FloatTensor& t, int bits);
FloatTensor rtn_quantize(const FloatTensor& t, int bits);
}  // namespace serial

}  // namespace fineq
