#include "fineq/types.hpp"

#include <cmath>

namespace fineq {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFinite:
    case ErrorKind::DimMismatch:
    case ErrorKind::InvalidArgument:
    case ErrorKind::OffGrid:
    case ErrorKind::PairMismatch:
      return 1;
    case ErrorKind::MissingFile:
    case ErrorKind::SizeMismatch:
    case ErrorKind::BadManifest:
    case ErrorKind::BadMagic:
    case ErrorKind::BadVersion:
    case ErrorKind::Truncated:
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Internal:
      return 3;
  }
  return 3;
}

FloatTensor::FloatTensor(uint32_t r, uint32_t c, ChannelAxis axis)
    : rows(r), cols(c), channel_axis(axis) {
  if (r == 0 || c == 0)
    throw Error(ErrorKind::InvalidArgument, "tensor dimensions must be >= 1");
  data.assign(uint64_t(r) * c, 0.0f);
}

void require_finite(const FloatTensor& t) {
  for (float v : t.data)
    if (!std::isfinite(v))
      throw Error(ErrorKind::NonFinite, "tensor contains a non-finite value");
}

uint64_t packed_file_size(uint32_t rows, uint32_t cols, ChannelAxis axis) {
  const uint32_t channels = axis == ChannelAxis::Row ? rows : cols;
  const uint32_t len = axis == ChannelAxis::Row ? cols : rows;
  const uint32_t bpc = blocks_for_clusters(clusters_for_length(len));
  return kPackedHeaderBytes + 4ull * channels +
         uint64_t(channels) * bpc * kBlockBytes;
}

}  // namespace fineq
