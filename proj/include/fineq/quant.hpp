#pragma once

#include <array>
#include <optional>
#include <span>

#include "fineq/types.hpp"

namespace fineq {

/// Encoding selected for a cluster of 3 consecutive weights. All2 keeps
/// every value at 2 bits on the coarse grid; ZeroK sacrifices position
/// k (stored as exact zero) so the other two keep full 3-bit precision.
/// The numeric value doubles as the 2-bit code stored in the index byte.
enum class SchemeCode : uint8_t {
  All2 = 0,
  ZeroFirst = 1,
  ZeroSecond = 2,
  ZeroThird = 3,
};

/// Three consecutive weights from one channel. A short tail cluster is
/// padded with exact zeros.
using Cluster = std::array<float, 3>;

/// Per-channel grid steps. s3 is the 3-bit step max|w|/3; the 2-bit step
/// is 3*s3, kept in double so the triple is exact.
struct ChannelQuantParams {
  float s3 = 0.0f;
  double s2() const { return 3.0 * double(s3); }
};

/// Integer form of one cluster. Values live on {-3..3}; All2 clusters are
/// lifted onto {-3, 0, 3} so s3 is the single dequantization step.
struct QuantizedCluster {
  SchemeCode scheme = SchemeCode::All2;
  std::array<int8_t, 3> q{0, 0, 0};
  bool operator==(const QuantizedCluster&) const = default;
};

struct QuantConfig {
  /// Channel axis override; the tensor's own axis applies when unset.
  std::optional<ChannelAxis> channel_axis;
  /// Joint scheme search for pairs whose individual choices disagree.
  /// When off, a disagreeing pair falls back to the even cluster's scheme.
  bool harmonize = true;
};

struct QuantizedTensor {
  uint32_t rows = 0;
  uint32_t cols = 0;
  ChannelAxis channel_axis = ChannelAxis::Row;
  uint32_t channel_length = 0;       // weights per channel, pre-padding
  uint32_t clusters_per_channel = 0; // ceil(channel_length / 3)
  std::vector<float> scales;         // s3 per channel
  std::vector<QuantizedCluster> clusters; // channel-major

  uint32_t num_channels() const {
    return channel_axis == ChannelAxis::Row ? rows : cols;
  }
  std::span<const QuantizedCluster> channel_clusters(uint32_t ch) const {
    return {clusters.data() + size_t(ch) * clusters_per_channel,
            clusters_per_channel};
  }
  ChannelQuantParams params(uint32_t ch) const { return {scales[ch]}; }

  bool operator==(const QuantizedTensor&) const = default;
};

struct AverageBits {
  double payload_bits_per_weight = 0.0;
  /// True when cluster or block padding inflates the figure, i.e. the
  /// channel length is not a multiple of 24.
  bool padding_overhead = false;
};

/// s3 = max|w| / 3 over the channel. All-zero channel gives s3 = 0.
ChannelQuantParams channel_scale(std::span<const float> channel);

/// Outlier test on absolute magnitudes: max > 4 * min picks the ZeroK
/// scheme sacrificing the smallest-magnitude position (lowest index on
/// ties); otherwise all three stay at 2 bits.
SchemeCode select_scheme(const Cluster& c);

/// Rounds onto the scheme's grid, half away from zero. All2 values land
/// on {-3, 0, 3}; ZeroK survivors clamp to [-3, 3]; s3 = 0 gives zeros.
QuantizedCluster quantize_cluster(const Cluster& c, SchemeCode scheme,
                                  const ChannelQuantParams& p);

/// value = q * s3 for every position.
Cluster dequantize_cluster(const QuantizedCluster& qc,
                           const ChannelQuantParams& p);

/// Total squared reconstruction error of both clusters under one scheme.
double pair_loss(const Cluster& a, const Cluster& b, SchemeCode scheme,
                 const ChannelQuantParams& p);

/// Shared scheme for a cluster pair: the individual pick when both agree,
/// otherwise the squared-error argmin over all four schemes (lowest code
/// wins ties).
SchemeCode harmonize_pair(const Cluster& a, const Cluster& b,
                          const ChannelQuantParams& p);

/// Full pipeline over every channel: scale, per-cluster scheme selection,
/// pair harmonization, rounding. A trailing unpaired cluster keeps its
/// own scheme. Channels are processed in parallel.
QuantizedTensor quantize_matrix(const FloatTensor& t,
                                const QuantConfig& cfg = {});

/// Reconstructs the tensor at original dimensions (padding removed).
FloatTensor dequantize_matrix(const QuantizedTensor& q);

/// Payload bits (7 bytes per 8-cluster block) per original weight.
AverageBits average_bits(const QuantizedTensor& q);

/// Cluster counts indexed by scheme code.
std::array<uint64_t, 4> scheme_histogram(const QuantizedTensor& q);

namespace serial {
/// Reference single-thread implementations of the parallel kernels above.
QuantizedTensor quantize_matrix(const FloatTensor& t,
                                const QuantConfig& cfg = {});
FloatTensor dequantize_matrix(const QuantizedTensor& q);
}  // namespace serial

}  // namespace fineq
