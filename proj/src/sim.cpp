#include "fineq/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace fineq {

namespace {

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

void validate_config(const SimConfig& cfg) {
  if (cfg.array_rows == 0 || cfg.array_cols == 0 || cfg.decoders == 0 ||
      cfg.mem_bytes_per_cycle == 0)
    throw Error(ErrorKind::InvalidArgument,
                "array, decoder and bus sizes must be >= 1");
  if (cfg.bitstream_max_len != 3)
    throw Error(ErrorKind::InvalidArgument,
                "bitstream length is fixed at 3 for the {-3..3} grid");
}

// M x K weight grid on {-3..3}, channel padding dropped. Channels must
// run along rows so each output row carries a single scale.
void require_row_channels(ChannelAxis axis) {
  if (axis != ChannelAxis::Row)
    throw Error(ErrorKind::InvalidArgument,
                "matmul needs row channels (one scale per output row)");
}

std::vector<int8_t> weight_grid(const QuantizedTensor& w) {
  require_row_channels(w.channel_axis);
  const uint32_t m = w.rows, k = w.cols;
  if (m == 0 || k == 0 || w.channel_length != k ||
      w.clusters_per_channel != clusters_for_length(k) ||
      w.scales.size() != m ||
      w.clusters.size() != size_t(m) * w.clusters_per_channel)
    throw Error(ErrorKind::InvalidArgument,
                "quantized tensor layout is inconsistent");
  std::vector<int8_t> grid(size_t(m) * k);
  for (uint32_t r = 0; r < m; ++r) {
    const QuantizedCluster* cl =
        w.clusters.data() + size_t(r) * w.clusters_per_channel;
    for (uint32_t j = 0; j < k; ++j)
      grid[size_t(r) * k + j] = cl[j / kClusterSize].q[j % kClusterSize];
  }
  return grid;
}

std::vector<int8_t> weight_grid(const PackedTensor& p) {
  require_row_channels(p.channel_axis);
  const uint32_t m = p.rows, k = p.cols;
  const uint32_t bpc = p.blocks_per_channel();
  if (m == 0 || k == 0 ||
      p.clusters_per_channel != clusters_for_length(k) ||
      p.scales.size() != m ||
      p.blocks.size() != size_t(m) * bpc * kBlockBytes)
    throw Error(ErrorKind::InvalidArgument,
                "packed tensor layout is inconsistent");
  std::vector<int8_t> grid(size_t(m) * k);
  for (uint32_t r = 0; r < m; ++r) {
    const uint8_t* bytes = p.blocks.data() + size_t(r) * bpc * kBlockBytes;
    for (uint32_t blk = 0; blk < bpc; ++blk) {
      PackedBlock b;
      b.index = bytes[blk * kBlockBytes];
      for (int i = 0; i < 6; ++i)
        b.payload[i] = bytes[blk * kBlockBytes + 1 + i];
      const std::array<int8_t, 24> w24 = hw_decode(b);
      const uint32_t base = blk * kClustersPerBlock * kClusterSize;
      const uint32_t take = std::min<uint32_t>(24, k - std::min(k, base));
      for (uint32_t i = 0; i < take; ++i)
        grid[size_t(r) * k + base + i] = w24[i];
    }
  }
  return grid;
}

// Static accounting shared by the simulation and the closed-form
// estimate: decode, memory and writeback stages plus preload/vector,
// which depend on shape only.
void fill_static_stats(uint32_t m, uint32_t k, uint32_t n, ChannelAxis axis,
                       const SimConfig& cfg, ActivityStats& st) {
  const uint64_t rows = axis == ChannelAxis::Row ? m : k;
  const uint64_t blocks =
      rows * blocks_for_clusters(
                 clusters_for_length(axis == ChannelAxis::Row ? k : m));
  st.decoded_clusters = blocks * kClustersPerBlock;
  st.decode_cycles = ceil_div(blocks, cfg.decoders);
  st.bytes_in = packed_file_size(m, k, axis) + uint64_t(k) * n * 4;
  st.memory_read_cycles = ceil_div(st.bytes_in, cfg.mem_bytes_per_cycle);
  st.bytes_out = uint64_t(m) * n * 4;
  st.writeback_cycles = ceil_div(st.bytes_out, cfg.mem_bytes_per_cycle);
  const uint64_t n_tiles = ceil_div(n, cfg.array_cols);
  st.preload_cycles = uint64_t(k) * n_tiles;
  st.vector_cycles = uint64_t(m) * n_tiles;
}

SimResult run_matmul_grid(const std::vector<int8_t>& grid, uint32_t m,
                          uint32_t k, const std::vector<float>& scales,
                          const FloatTensor& x, const SimConfig& cfg) {
  validate_config(cfg);
  if (x.rows != k)
    throw Error(ErrorKind::DimMismatch,
                "activation rows " + std::to_string(x.rows) +
                    " do not match weight columns " + std::to_string(k));
  require_finite(x);
  const uint32_t n = x.cols;

  SimResult r;
  r.y = FloatTensor(m, n);
  ActivityStats& st = r.stats;
  fill_static_stats(m, k, n, ChannelAxis::Row, cfg, st);
  st.preload_cycles = 0;  // re-counted tile by tile below
  st.vector_cycles = 0;

  const uint32_t n_tiles = uint32_t(ceil_div(n, cfg.array_cols));
  const uint32_t k_tiles = uint32_t(ceil_div(k, cfg.array_rows));
  std::vector<double> acc;

  for (uint32_t nt = 0; nt < n_tiles; ++nt) {
    const uint32_t n0 = nt * cfg.array_cols;
    const uint32_t nw = std::min(cfg.array_cols, n - n0);
    acc.assign(size_t(m) * nw, 0.0);
    MatView<double> accv{acc.data(), m, nw, nw};

    for (uint32_t kt = 0; kt < k_tiles; ++kt) {
      const uint32_t k0 = kt * cfg.array_rows;
      const uint32_t kw = std::min(cfg.array_rows, k - k0);
      st.preload_cycles += kw;
      MatView<const int8_t> wv{grid.data() + k0, m, kw, k};
      MatView<const float> xv{x.data.data() + size_t(k0) * n + n0, kw, nw, n};
      pe_tile_matmul(wv, xv, accv, cfg, st);
      for (const double v : acc)
        st.max_abs_partial = std::max(st.max_abs_partial, std::fabs(v));
    }

    st.vector_cycles += m;
    for (uint32_t row = 0; row < m; ++row)
      for (uint32_t c = 0; c < nw; ++c)
        r.y.at(row, n0 + c) =
            float(double(scales[row]) * acc[size_t(row) * nw + c]);
  }
  return r;
}

}  // namespace

uint64_t ActivityStats::total_cycles_overlapped() const {
  return std::max({memory_read_cycles, decode_cycles, preload_cycles,
                   matmul_cycles, vector_cycles, writeback_cycles});
}

uint32_t group_length(uint32_t group_max_magnitude, const SimConfig& cfg) {
  if (group_max_magnitude > cfg.bitstream_max_len)
    throw Error(ErrorKind::OffGrid,
                "magnitude " + std::to_string(group_max_magnitude) +
                    " exceeds the bitstream length");
  return cfg.early_termination ? std::max(1u, group_max_magnitude)
                               : cfg.bitstream_max_len;
}

Bitstream temporal_encode(uint32_t magnitude, uint32_t length, int sign) {
  if (magnitude > 3)
    throw Error(ErrorKind::OffGrid,
                "magnitude " + std::to_string(magnitude) + " is off-grid");
  if (length < 1 || length > 3 || magnitude > length)
    throw Error(ErrorKind::InvalidArgument,
                "stream length must lie in [max(1, magnitude), 3]");
  Bitstream s;
  s.length = uint8_t(length);
  s.ones = uint8_t(magnitude);
  s.sign = int8_t(sign < 0 ? -1 : 1);
  return s;
}

std::array<int8_t, 24> hw_decode(const PackedBlock& block) {
  // Bit-serial reader mirroring the decoder front end: payload bits shift
  // out MSB-first while the index byte steers each position's selector.
  struct BitCursor {
    const std::array<uint8_t, 6>& bytes;
    uint32_t pos = 0;
    uint32_t take(uint32_t n) {
      uint32_t v = 0;
      for (; n; --n, ++pos)
        v = (v << 1) | ((bytes[pos >> 3] >> (7 - (pos & 7))) & 1u);
      return v;
    }
  };

  std::array<int8_t, 24> w{};
  BitCursor cur{block.payload};
  for (int ci = 0; ci < 8; ++ci) {
    const uint32_t code = (block.index >> (6 - 2 * (ci / 2))) & 0x3u;
    for (int pos = 0; pos < 3; ++pos) {
      int v;
      if (code == 0) {
        const uint32_t f = cur.take(2);
        const int mag = (f & 1u) ? 3 : 0;  // lift onto the 3-bit grid
        v = (f & 2u) ? -mag : mag;
      } else if (pos == int(code) - 1) {
        v = 0;  // zero-padding selector, no payload bits consumed
      } else {
        const uint32_t f = cur.take(3);
        const int mag = int(f & 3u);
        v = (f & 4u) ? -mag : mag;
      }
      w[ci * 3 + pos] = int8_t(v);
    }
  }
  return w;
}

void pe_tile_matmul(MatView<const int8_t> w, MatView<const float> x,
                    MatView<double> acc, const SimConfig& cfg,
                    ActivityStats& stats) {
  validate_config(cfg);
  if (x.rows > cfg.array_rows || x.cols > cfg.array_cols)
    throw Error(ErrorKind::DimMismatch, "tile exceeds the PE array");
  if (w.cols != x.rows || acc.rows != w.rows || acc.cols != x.cols)
    throw Error(ErrorKind::DimMismatch, "tile shapes disagree");

  const uint32_t kw = w.cols, nw = x.cols;
  std::vector<Bitstream> streams(kw);

  for (uint32_t m = 0; m < w.rows; ++m) {
    uint32_t gmax = 0;
    for (uint32_t k = 0; k < kw; ++k) {
      const int v = w.at(m, k);
      if (v < -3 || v > 3)
        throw Error(ErrorKind::OffGrid,
                    "weight " + std::to_string(v) + " is off-grid");
      gmax = std::max(gmax, uint32_t(std::abs(v)));
    }
    const uint32_t len = group_length(gmax, cfg);
    for (uint32_t k = 0; k < kw; ++k) {
      const int v = w.at(m, k);
      streams[k] = temporal_encode(uint32_t(std::abs(v)), len, v < 0 ? -1 : 1);
    }

    for (uint32_t t = 0; t < len; ++t) {
      for (uint32_t k = 0; k < kw; ++k) {
        if (!streams[k].bit(t)) continue;
        stats.selector_activations += nw;
        const float* xr = &x.at(k, 0);
        double* ar = &acc.at(m, 0);
        if (streams[k].sign < 0)
          for (uint32_t c = 0; c < nw; ++c) ar[c] -= double(xr[c]);
        else
          for (uint32_t c = 0; c < nw; ++c) ar[c] += double(xr[c]);
      }
    }

    stats.matmul_cycles += len;
    stats.adder_tree_ops += uint64_t(len) * kw * nw;
  }
}

SimResult run_matmul(const QuantizedTensor& w, const FloatTensor& x,
                     const SimConfig& cfg) {
  return run_matmul_grid(weight_grid(w), w.rows, w.cols, w.scales, x, cfg);
}

SimResult run_matmul(const PackedTensor& w, const FloatTensor& x,
                     const SimConfig& cfg) {
  return run_matmul_grid(weight_grid(w), w.rows, w.cols, w.scales, x, cfg);
}

ActivityStats estimate(const QuantizedTensor& w, uint32_t n_cols,
                       const SimConfig& cfg) {
  validate_config(cfg);
  if (n_cols == 0)
    throw Error(ErrorKind::InvalidArgument, "activation width must be >= 1");
  const std::vector<int8_t> grid = weight_grid(w);
  const uint32_t m = w.rows, k = w.cols, n = n_cols;

  ActivityStats st;
  fill_static_stats(m, k, n, ChannelAxis::Row, cfg, st);

  const uint64_t n_tiles = ceil_div(n, cfg.array_cols);
  const uint32_t k_tiles = uint32_t(ceil_div(k, cfg.array_rows));

  uint64_t mag_sum = 0;
  uint64_t row_tile_cycles = 0;  // sum over (row, K tile) of stream length
  uint64_t tree_inputs = 0;      // same sum weighted by the tile's K width
  for (uint32_t kt = 0; kt < k_tiles; ++kt) {
    const uint32_t k0 = kt * cfg.array_rows;
    const uint32_t kw = std::min(cfg.array_rows, k - k0);
    for (uint32_t row = 0; row < m; ++row) {
      uint32_t gmax = 0;
      for (uint32_t j = 0; j < kw; ++j) {
        const uint32_t mag = uint32_t(std::abs(grid[size_t(row) * k + k0 + j]));
        gmax = std::max(gmax, mag);
        mag_sum += mag;
      }
      const uint64_t len = group_length(gmax, cfg);
      row_tile_cycles += len;
      tree_inputs += len * kw;
    }
  }

  st.matmul_cycles = row_tile_cycles * n_tiles;
  st.selector_activations = mag_sum * n;
  st.adder_tree_ops = tree_inputs * n;
  return st;
}

}  // namespace fineq
