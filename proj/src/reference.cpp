#include "fineq/reference.hpp"

#include <cmath>
#include <limits>

#include "fineq/parallel.hpp"

namespace fineq {

namespace {

void matmul_row(const FloatTensor& a, const FloatTensor& b, FloatTensor& y,
                uint32_t m) {
  for (uint32_t n = 0; n < b.cols; ++n) {
    double acc = 0.0;
    for (uint32_t k = 0; k < a.cols; ++k)
      acc += double(a.at(m, k)) * double(b.at(k, n));
    y.at(m, n) = float(acc);
  }
}

void validate_dims(const FloatTensor& a, const FloatTensor& b) {
  if (a.cols != b.rows)
    throw Error(ErrorKind::DimMismatch,
                "inner dimensions disagree: " + std::to_string(a.cols) +
                    " vs " + std::to_string(b.rows));
}

}  // namespace

FloatTensor reference_matmul(const FloatTensor& a, const FloatTensor& b) {
  validate_dims(a, b);
  FloatTensor y(a.rows, b.cols);
  const int64_t rows = a.rows;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t m = 0; m < rows; ++m) matmul_row(a, b, y, uint32_t(m));
  return y;
}

double max_rel_error(const FloatTensor& y, const FloatTensor& ref) {
  if (y.rows != ref.rows || y.cols != ref.cols)
    throw Error(ErrorKind::DimMismatch, "shape mismatch in error norm");
  double max_diff = 0.0, max_ref = 0.0;
  for (uint64_t i = 0; i < ref.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(double(y.data[i]) - ref.data[i]));
    max_ref = std::max(max_ref, std::fabs(double(ref.data[i])));
  }
  if (max_ref == 0.0)
    return max_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return max_diff / max_ref;
}

namespace serial {

FloatTensor reference_matmul(const FloatTensor& a, const FloatTensor& b) {
  validate_dims(a, b);
  FloatTensor y(a.rows, b.cols);
  for (uint32_t m = 0; m < a.rows; ++m) matmul_row(a, b, y, m);
  return y;
}

}  // namespace serial

}  // namespace fineq
