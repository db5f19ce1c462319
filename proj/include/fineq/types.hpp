#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fineq {

enum class ChannelAxis : uint8_t { Row = 0, Col = 1 };

enum class ErrorKind {
  MissingFile,
  SizeMismatch,
  NonFinite,
  BadManifest,
  BadMagic,
  BadVersion,
  Truncated,
  DimMismatch,
  InvalidArgument,
  OffGrid,
  PairMismatch,
  Io,
  Internal,
};

/// Process exit-code bucket for an error kind: 1 validation, 2 I/O, 3 internal.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return exit_code_for(kind_); }

private:
  ErrorKind kind_;
};

/// Row-major 2-D matrix of finite 32-bit floats. The channel axis names
/// which dimension the per-channel quantization scales run over.
struct FloatTensor {
  uint32_t rows = 0;
  uint32_t cols = 0;
  ChannelAxis channel_axis = ChannelAxis::Row;
  std::vector<float> data;

  FloatTensor() = default;
  FloatTensor(uint32_t r, uint32_t c, ChannelAxis axis = ChannelAxis::Row);

  float at(uint32_t r, uint32_t c) const { return data[size_t(r) * cols + c]; }
  float& at(uint32_t r, uint32_t c) { return data[size_t(r) * cols + c]; }
  uint64_t size() const { return uint64_t(rows) * cols; }
  uint32_t num_channels() const {
    return channel_axis == ChannelAxis::Row ? rows : cols;
  }
  uint32_t channel_length() const {
    return channel_axis == ChannelAxis::Row ? cols : rows;
  }

  bool operator==(const FloatTensor&) const = default;
};

/// Throws NonFinite if any element is NaN or infinite.
void require_finite(const FloatTensor& t);

// Packed-format layout constants. Three weights form a cluster; eight
// clusters share one block of 1 index byte + 6 payload bytes, so every
// cluster costs exactly 6 payload bits regardless of its scheme.
inline constexpr uint32_t kClusterSize = 3;
inline constexpr uint32_t kClustersPerBlock = 8;
inline constexpr uint32_t kBlockBytes = 7;
inline constexpr uint32_t kPackedHeaderBytes = 19;
inline constexpr char kPackedMagic[4] = {'F', 'I', 'N', 'Q'};
inline constexpr uint16_t kPackedVersion = 1;

constexpr uint32_t clusters_for_length(uint32_t len) {
  return (len + kClusterSize - 1) / kClusterSize;
}
constexpr uint32_t blocks_for_clusters(uint32_t clusters) {
  return (clusters + kClustersPerBlock - 1) / kClustersPerBlock;
}

/// Storage form of a quantized tensor.
///
/// Serialized layout (all integers little-endian, scales f32 little-endian):
///   magic            4 bytes  "FINQ"
///   version          u16      = 1
///   rows, cols       u32, u32
///   channel_axis     u8       0 = row, 1 = col
///   clusters/channel u32      pre-padding cluster count per channel
///   scales           f32 x num_channels
///   blocks           7 bytes x blocks_per_channel x num_channels
struct PackedTensor {
  uint32_t rows = 0;
  uint32_t cols = 0;
  ChannelAxis channel_axis = ChannelAxis::Row;
  uint32_t clusters_per_channel = 0;
  std::vector<float> scales;
  std::vector<uint8_t> blocks;

  uint32_t num_channels() const {
    return channel_axis == ChannelAxis::Row ? rows : cols;
  }
  uint32_t channel_length() const {
    return channel_axis == ChannelAxis::Row ? cols : rows;
  }
  uint32_t blocks_per_channel() const {
    return blocks_for_clusters(clusters_per_channel);
  }

  bool operator==(const PackedTensor&) const = default;
};

/// Total serialized byte count for a tensor of the given shape.
uint64_t packed_file_size(uint32_t rows, uint32_t cols, ChannelAxis axis);

}  // namespace fineq
