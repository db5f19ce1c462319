#include "fineq/codec.hpp"

#include <cstdlib>

#include "fineq/parallel.hpp"

namespace fineq {

namespace {

uint32_t cluster_field(const QuantizedCluster& c) {
  uint32_t field = 0;
  if (c.scheme == SchemeCode::All2) {
    for (int j = 0; j < 3; ++j) {
      const int v = c.q[j];
      if (v != -3 && v != 0 && v != 3)
        throw Error(ErrorKind::OffGrid,
                    "All2 value " + std::to_string(v) +
                        " is not on {-3, 0, 3}");
      const uint32_t mag = v != 0;
      const uint32_t sign = v < 0;
      field = (field << 2) | (sign << 1) | mag;
    }
  } else {
    const int zp = int(c.scheme) - 1;
    if (c.q[zp] != 0)
      throw Error(ErrorKind::OffGrid, "sacrificed position must hold zero");
    for (int j = 0; j < 3; ++j) {
      if (j == zp) continue;
      const int v = c.q[j];
      if (v < -3 || v > 3)
        throw Error(ErrorKind::OffGrid,
                    "value " + std::to_string(v) + " exceeds the 3-bit grid");
      const uint32_t mag = uint32_t(std::abs(v));
      const uint32_t sign = v < 0;
      field = (field << 3) | (sign << 2) | mag;
    }
  }
  return field;
}

// Scheme code for cluster ci, read from the pair field of the index byte.
SchemeCode scheme_at(uint8_t index, int ci) {
  return SchemeCode((index >> (6 - 2 * (ci / 2))) & 0x3u);
}

void pack_channel(const QuantizedCluster* clusters, uint32_t real_count,
                  uint32_t bpc, uint8_t* out) {
  for (uint32_t blk = 0; blk < bpc; ++blk) {
    std::array<QuantizedCluster, 8> eight{};
    for (uint32_t slot = 0; slot < kClustersPerBlock; ++slot) {
      const uint32_t ci = blk * kClustersPerBlock + slot;
      if (ci < real_count) {
        eight[slot] = clusters[ci];
      } else {
        const uint32_t mate = ci ^ 1u;
        eight[slot].scheme =
            mate < real_count ? clusters[mate].scheme : SchemeCode::All2;
      }
    }
    const PackedBlock b = pack_block(eight);
    out[blk * kBlockBytes] = b.index;
    for (int i = 0; i < 6; ++i) out[blk * kBlockBytes + 1 + i] = b.payload[i];
  }
}

void unpack_channel(const uint8_t* bytes, uint32_t bpc, uint32_t real_count,
                    QuantizedCluster* out, UnpackFlags* flags) {
  for (uint32_t blk = 0; blk < bpc; ++blk) {
    PackedBlock b;
    b.index = bytes[blk * kBlockBytes];
    for (int i = 0; i < 6; ++i) b.payload[i] = bytes[blk * kBlockBytes + 1 + i];
    const auto eight = unpack_block(b, flags);
    for (uint32_t slot = 0; slot < kClustersPerBlock; ++slot) {
      const uint32_t ci = blk * kClustersPerBlock + slot;
      if (ci < real_count) out[ci] = eight[slot];
    }
  }
}

PackedTensor prepare_packed(const QuantizedTensor& q) {
  if (q.rows == 0 || q.cols == 0 ||
      q.clusters_per_channel != clusters_for_length(q.channel_length) ||
      q.scales.size() != q.num_channels() ||
      q.clusters.size() != size_t(q.num_channels()) * q.clusters_per_channel)
    throw Error(ErrorKind::InvalidArgument,
                "quantized tensor layout is inconsistent");
  PackedTensor p;
  p.rows = q.rows;
  p.cols = q.cols;
  p.channel_axis = q.channel_axis;
  p.clusters_per_channel = q.clusters_per_channel;
  p.scales = q.scales;
  p.blocks.assign(
      size_t(q.num_channels()) * p.blocks_per_channel() * kBlockBytes, 0);
  return p;
}

QuantizedTensor prepare_unpacked(const PackedTensor& p) {
  QuantizedTensor q;
  q.rows = p.rows;
  q.cols = p.cols;
  q.channel_axis = p.channel_axis;
  q.channel_length = p.channel_length();
  q.clusters_per_channel = p.clusters_per_channel;
  q.scales = p.scales;
  q.clusters.resize(size_t(p.num_channels()) * p.clusters_per_channel);

  const uint64_t expected =
      uint64_t(p.num_channels()) * p.blocks_per_channel() * kBlockBytes;
  if (p.blocks.size() != expected)
    throw Error(ErrorKind::Truncated,
                "block stream is " + std::to_string(p.blocks.size()) +
                    " bytes, expected " + std::to_string(expected));
  if (p.clusters_per_channel != clusters_for_length(q.channel_length))
    throw Error(ErrorKind::InvalidArgument,
                "cluster count disagrees with tensor dims");
  return q;
}

}  // namespace

PackedBlock pack_block(std::span<const QuantizedCluster, 8> clusters) {
  PackedBlock out;
  for (int p = 0; p < 4; ++p) {
    const QuantizedCluster& a = clusters[2 * p];
    const QuantizedCluster& b = clusters[2 * p + 1];
    if (a.scheme != b.scheme)
      throw Error(ErrorKind::PairMismatch,
                  "clusters " + std::to_string(2 * p) + " and " +
                      std::to_string(2 * p + 1) + " disagree on scheme");
    out.index |= uint8_t(uint8_t(a.scheme) << (6 - 2 * p));
  }

  uint64_t bits = 0;
  for (int ci = 0; ci < 8; ++ci)
    bits = (bits << 6) | cluster_field(clusters[ci]);
  for (int i = 0; i < 6; ++i)
    out.payload[i] = uint8_t(bits >> (40 - 8 * i));
  return out;
}

std::array<QuantizedCluster, 8> unpack_block(const PackedBlock& b,
                                             UnpackFlags* flags) {
  uint64_t bits = 0;
  for (int i = 0; i < 6; ++i) bits = (bits << 8) | b.payload[i];

  std::array<QuantizedCluster, 8> out{};
  for (int ci = 0; ci < 8; ++ci) {
    const SchemeCode scheme = scheme_at(b.index, ci);
    const uint32_t field = uint32_t(bits >> (42 - 6 * ci)) & 0x3Fu;
    QuantizedCluster& qc = out[ci];
    qc.scheme = scheme;

    if (scheme == SchemeCode::All2) {
      for (int j = 0; j < 3; ++j) {
        const uint32_t f = (field >> (4 - 2 * j)) & 0x3u;
        const int mag = (f & 1u) ? 3 : 0;
        bool neg = f & 2u;
        if (neg && mag == 0) {
          neg = false;
          if (flags) ++flags->noncanonical_zeros;
        }
        qc.q[j] = int8_t(neg ? -mag : mag);
      }
    } else {
      const int zp = int(scheme) - 1;
      int fi = 0;
      for (int j = 0; j < 3; ++j) {
        if (j == zp) continue;
        const uint32_t f = (field >> (3 - 3 * fi)) & 0x7u;
        ++fi;
        const int mag = int(f & 3u);
        bool neg = f & 4u;
        if (neg && mag == 0) {
          neg = false;
          if (flags) ++flags->noncanonical_zeros;
        }
        qc.q[j] = int8_t(neg ? -mag : mag);
      }
    }
  }
  return out;
}

PackedTensor pack_tensor(const QuantizedTensor& q) {
  PackedTensor p = prepare_packed(q);
  const uint32_t bpc = p.blocks_per_channel();
  const int64_t channels = q.num_channels();

#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t ch = 0; ch < channels; ++ch)
    pack_channel(q.clusters.data() + ch * q.clusters_per_channel,
                 q.clusters_per_channel, bpc,
                 p.blocks.data() + ch * size_t(bpc) * kBlockBytes);
  return p;
}

QuantizedTensor unpack_tensor(const PackedTensor& p, UnpackFlags* flags) {
  QuantizedTensor q = prepare_unpacked(p);
  const uint32_t bpc = p.blocks_per_channel();
  const int64_t channels = p.num_channels();

  if (flags) {
    // Flag counting needs a deterministic tally; keep that path serial.
    for (int64_t ch = 0; ch < channels; ++ch)
      unpack_channel(p.blocks.data() + ch * size_t(bpc) * kBlockBytes, bpc,
                     q.clusters_per_channel,
                     q.clusters.data() + ch * q.clusters_per_channel, flags);
    return q;
  }

#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t ch = 0; ch < channels; ++ch)
    unpack_channel(p.blocks.data() + ch * size_t(bpc) * kBlockBytes, bpc,
                   q.clusters_per_channel,
                   q.clusters.data() + ch * q.clusters_per_channel, nullptr);
  return q;
}

namespace serial {

PackedTensor pack_tensor(const QuantizedTensor& q) {
  PackedTensor p = prepare_packed(q);
  const uint32_t bpc = p.blocks_per_channel();
  for (uint32_t ch = 0; ch < q.num_channels(); ++ch)
    pack_channel(q.clusters.data() + size_t(ch) * q.clusters_per_channel,
                 q.clusters_per_channel, bpc,
                 p.blocks.data() + size_t(ch) * bpc * kBlockBytes);
  return p;
}

QuantizedTensor unpack_tensor(const PackedTensor& p, UnpackFlags* flags) {
  QuantizedTensor q = prepare_unpacked(p);
  const uint32_t bpc = p.blocks_per_channel();
  for (uint32_t ch = 0; ch < p.num_channels(); ++ch)
    unpack_channel(p.blocks.data() + size_t(ch) * bpc * kBlockBytes, bpc,
                   q.clusters_per_channel,
                   q.clusters.data() + size_t(ch) * q.clusters_per_channel,
                   flags);
  return q;
}

}  // namespace serial

}  // namespace fineq
