#pragma once

#include <array>
#include <cstdint>

#include "fineq/codec.hpp"
#include "fineq/types.hpp"

namespace fineq {

/// Per-event energy weights for the activity proxy. Dimensionless knobs,
/// all 1.0 unless configured.
struct EnergyWeights {
  double selector = 1.0;
  double adder = 1.0;
  double decoded_cluster = 1.0;
  double byte_in = 1.0;
  double byte_out = 1.0;
};

struct SimConfig {
  uint32_t array_rows = 64;   // PE rows; holds the K (reduction) tile
  uint32_t array_cols = 64;   // PE columns; holds the N (output) tile
  uint32_t decoders = 64;     // blocks decoded per cycle
  uint32_t bitstream_max_len = 3;
  bool early_termination = true;
  /// false: pipeline stages run back to back (total = sum);
  /// true: perfect overlap (total = max stage). Both bounds are reported.
  bool overlap_stages = false;
  uint32_t mem_bytes_per_cycle = 64;
  EnergyWeights energy;
};

/// Activity counters accumulated by the simulator. Definitions:
///  - selector_activations: (weight bit = 1, PE) events; equals
///    sum of weight magnitudes times the active output width.
///  - adder_tree_ops: accumulation-tree inputs, K_tile per lane per
///    matmul cycle.
///  - decoded_clusters: 8 per block over the whole weight stream.
///  - bytes_in: packed weight stream plus f32 activations;
///    bytes_out: f32 results.
///  - max_abs_partial: largest pre-scale partial-sum magnitude seen at
///    tile boundaries, for sizing accumulator widths.
struct ActivityStats {
  uint64_t memory_read_cycles = 0;
  uint64_t decode_cycles = 0;
  uint64_t preload_cycles = 0;
  uint64_t matmul_cycles = 0;
  uint64_t vector_cycles = 0;
  uint64_t writeback_cycles = 0;

  uint64_t selector_activations = 0;
  uint64_t adder_tree_ops = 0;
  uint64_t decoded_clusters = 0;
  uint64_t bytes_in = 0;
  uint64_t bytes_out = 0;

  double max_abs_partial = 0.0;

  uint64_t total_cycles_sequential() const {
    return memory_read_cycles + decode_cycles + preload_cycles +
           matmul_cycles + vector_cycles + writeback_cycles;
  }
  uint64_t total_cycles_overlapped() const;
  uint64_t total_cycles(const SimConfig& cfg) const {
    return cfg.overlap_stages ? total_cycles_overlapped()
                              : total_cycles_sequential();
  }
  double energy_proxy(const EnergyWeights& w) const {
    return w.selector * double(selector_activations) +
           w.adder * double(adder_tree_ops) +
           w.decoded_cluster * double(decoded_clusters) +
           w.byte_in * double(bytes_in) + w.byte_out * double(bytes_out);
  }

  bool operator==(const ActivityStats&) const = default;
};

/// Unary weight bitstream: `ones` leading 1-bits (the magnitude) followed
/// by zeros up to `length`; the sign travels beside the stream and is
/// applied in the accumulation stage.
struct Bitstream {
  uint8_t length = 1;
  uint8_t ones = 0;
  int8_t sign = 1;
  bool bit(uint32_t t) const { return t < ones; }
  bool operator==(const Bitstream&) const = default;
};

/// Stream length shared by one broadcast group: max(1, group max
/// magnitude) with early termination, the full bitstream length without.
uint32_t group_length(uint32_t group_max_magnitude, const SimConfig& cfg);

/// Magnitude in [0, 3] encoded as a unary stream of the given length.
Bitstream temporal_encode(uint32_t magnitude, uint32_t length, int sign = 1);

/// Decoder model: the index byte steers each cluster's payload bits
/// through selection units that re-insert the sacrificed zero and lift
/// All2 values, yielding 24 signed 3-bit weights. Implemented separately
/// from unpack_block; the two must agree bit for bit.
std::array<int8_t, 24> hw_decode(const PackedBlock& block);

/// Lightweight strided matrix view over caller-owned storage.
template <typename T>
struct MatView {
  T* data = nullptr;
  uint32_t rows = 0;
  uint32_t cols = 0;
  size_t stride = 0;  // elements between row starts
  T& at(uint32_t r, uint32_t c) const { return data[size_t(r) * stride + c]; }
};

/// One weight tile streamed over one stationary activation tile.
/// w is M_t x K_t on the {-3..3} grid, x is K_t x N_t (K_t <= array_rows,
/// N_t <= array_cols), acc is M_t x N_t and is accumulated in place.
/// Row m broadcasts its K_t bitstreams for group_length cycles; a set
/// weight bit adds the stationary activation into the row's lanes, exact
/// for integer activations. Updates matmul_cycles, selector_activations
/// and adder_tree_ops.
void pe_tile_matmul(MatView<const int8_t> w, MatView<const float> x,
                    MatView<double> acc, const SimConfig& cfg,
                    ActivityStats& stats);

struct SimResult {
  FloatTensor y;
  ActivityStats stats;
};

/// Full matmul Y = dequant(W) * X with K and N tiled to the array and
/// partial sums carried across K tiles before the per-row scale is
/// applied. Requires row channels so each output row has one scale.
SimResult run_matmul(const QuantizedTensor& w, const FloatTensor& x,
                     const SimConfig& cfg);

/// Same computation but the weights pass through hw_decode, exercising
/// the hardware decoder path.
SimResult run_matmul(const PackedTensor& w, const FloatTensor& x,
                     const SimConfig& cfg);

/// Closed-form prediction of every counter for run_matmul(w, X) with an
/// n_cols-wide activation matrix. Needs the weight magnitudes because
/// early termination sets per-row-tile stream lengths; no event loop is
/// involved. max_abs_partial depends on X and stays zero.
ActivityStats estimate(const QuantizedTensor& w, uint32_t n_cols,
                       const SimConfig& cfg);

}  // namespace fineq
