#pragma once

#include <array>
#include <span>

#include "fineq/quant.hpp"

namespace fineq {

/// One packed block of 8 clusters (24 weights).
///
/// index byte: pair scheme codes, pair 0 in bits [7:6] ... pair 3 in [1:0].
/// payload:    eight 6-bit cluster fields, MSB-first; cluster 0 occupies
///             the top 6 bits of payload[0].
///
/// Cluster field, All2:   three 2-bit values (sign, mag) in value order,
///                        mag = |q| / 3 in {0, 1}.
/// Cluster field, ZeroK:  two 3-bit survivors (sign, 2-bit mag) in value
///                        order, mag = |q| in {0..3}; position k-1 is
///                        implicit zero and stores no bits.
/// Zero is canonical with sign 0; a sign bit on magnitude 0 decodes to
/// zero and is counted in UnpackFlags.
struct PackedBlock {
  uint8_t index = 0;
  std::array<uint8_t, 6> payload{};
  bool operator==(const PackedBlock&) const = default;
};

struct UnpackFlags {
  uint64_t noncanonical_zeros = 0;
};

/// Pre: pairs (0,1), (2,3), (4,5), (6,7) share schemes, and every value
/// sits on its scheme's grid.
PackedBlock pack_block(std::span<const QuantizedCluster, 8> clusters);

/// Total: every index/payload combination decodes.
std::array<QuantizedCluster, 8> unpack_block(const PackedBlock& b,
                                             UnpackFlags* flags = nullptr);

/// Pads each channel to a whole number of blocks with zero clusters (a
/// padding cluster that shares a pair with a real cluster adopts its
/// scheme; fully-padded pairs use All2) and packs channel-major.
PackedTensor pack_tensor(const QuantizedTensor& q);

/// Inverse of pack_tensor; padding clusters are dropped.
QuantizedTensor unpack_tensor(const PackedTensor& p,
                              UnpackFlags* flags = nullptr);

namespace serial {
PackedTensor pack_tensor(const QuantizedTensor& q);
QuantizedTensor unpack_tensor(const PackedTensor& p,
                              UnpackFlags* flags = nullptr);
}  // namespace serial

}  // namespace fineq
