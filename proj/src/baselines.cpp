#include "fineq/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "fineq/parallel.hpp"

namespace fineq {

namespace {

void validate_bits(int bits) {
  if (bits < 2 || bits > 8)
    throw Error(ErrorKind::InvalidArgument,
                "bit width must lie in [2, 8], got " + std::to_string(bits));
}

void validate_input(const FloatTensor& t) {
  if (t.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "cannot quantize an empty tensor");
  require_finite(t);
}

void uniform_channel(const FloatTensor& t, FloatTensor& out, uint32_t ch,
                     int bits) {
  const uint32_t len = t.channel_length();
  const int64_t qmax = (1 << (bits - 1)) - 1;
  const bool by_row = t.channel_axis == ChannelAxis::Row;

  float amax = 0.0f;
  for (uint32_t j = 0; j < len; ++j) {
    const float v = by_row ? t.at(ch, j) : t.at(j, ch);
    amax = std::max(amax, std::fabs(v));
  }
  if (amax == 0.0f) {
    for (uint32_t j = 0; j < len; ++j)
      (by_row ? out.at(ch, j) : out.at(j, ch)) = 0.0f;
    return;
  }

  const double s = double(amax) / double(qmax);
  for (uint32_t j = 0; j < len; ++j) {
    const float v = by_row ? t.at(ch, j) : t.at(j, ch);
    const int64_t q =
        std::clamp<int64_t>(std::llround(double(v) / s), -qmax, qmax);
    (by_row ? out.at(ch, j) : out.at(j, ch)) = float(double(q) * s);
  }
}

void rtn_row(const FloatTensor& t, FloatTensor& out, uint32_t r, int bits) {
  const int64_t levels = (1 << bits) - 1;
  const float* row = t.data.data() + size_t(r) * t.cols;
  float* dst = out.data.data() + size_t(r) * t.cols;

  float mn = row[0], mx = row[0];
  for (uint32_t c = 1; c < t.cols; ++c) {
    mn = std::min(mn, row[c]);
    mx = std::max(mx, row[c]);
  }
  if (mn == mx) {
    // Degenerate grid; the constant row is representable exactly.
    std::copy(row, row + t.cols, dst);
    return;
  }

  const double scale = (double(mx) - double(mn)) / double(levels);
  const int64_t zero_point = std::llround(-double(mn) / scale);
  for (uint32_t c = 0; c < t.cols; ++c) {
    const int64_t q = std::clamp<int64_t>(
        std::llround(double(row[c]) / scale) + zero_point, 0, levels);
    dst[c] = float(double(q - zero_point) * scale);
  }
}

}  // namespace

FloatTensor uniform_quantize(const FloatTensor& t, int bits) {
  validate_bits(bits);
  validate_input(t);
  FloatTensor out(t.rows, t.cols, t.channel_axis);
  const int64_t channels = t.num_channels();
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t ch = 0; ch < channels; ++ch)
    uniform_channel(t, out, uint32_t(ch), bits);
  return out;
}

FloatTensor rtn_quantize(const FloatTensor& t, int bits) {
  validate_bits(bits);
  validate_input(t);
  FloatTensor out(t.rows, t.cols, t.channel_axis);
  const int64_t rows = t.rows;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t r = 0; r < rows; ++r) rtn_row(t, out, uint32_t(r), bits);
  return out;
}

namespace serial {

FloatTensor uniform_quantize(const FloatTensor& t, int bits) {
  validate_bits(bits);
  validate_input(t);
  FloatTensor out(t.rows, t.cols, t.channel_axis);
  for (uint32_t ch = 0; ch < t.num_channels(); ++ch)
    uniform_channel(t, out, ch, bits);
  return out;
}

FloatTensor rtn_quantize(const FloatTensor& t, int bits) {
  validate_bits(bits);
  validate_input(t);
  FloatTensor out(t.rows, t.cols, t.channel_axis);
  for (uint32_t r = 0; r < t.rows; ++r) rtn_row(t, out, r, bits);
  return out;
}

}  // namespace serial

}  // namespace fineq
