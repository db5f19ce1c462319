#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fineq/quant.hpp"
#include "fineq/sim.hpp"
#include "fineq/types.hpp"

#include <json.hpp>

namespace fineq {

/// Synthetic weight matrix: Gaussian(0, base_std) everywhere, then a
/// seeded-random fraction of the row channels gets a random subset of
/// entries multiplied by outlier_magnitude_mult. Fully determined by the
/// seed; mult = 1 or fraction = 0 leaves the Gaussian untouched.
struct GenSpec {
  uint32_t rows = 0;
  uint32_t cols = 0;
  double base_std = 1.0;
  double outlier_channel_fraction = 0.0;
  double outlier_magnitude_mult = 1.0;
  double outlier_density = 0.0;
  uint64_t seed = 0;
};

FloatTensor gen(const GenSpec& spec);

double mse(const FloatTensor& a, const FloatTensor& b);
double max_abs_err(const FloatTensor& a, const FloatTensor& b);

struct MethodReport {
  std::string method;
  double mse = 0.0;
  double max_abs_err = 0.0;
  double avg_bits_payload = 0.0;
  double avg_bits_total = 0.0;  // payload + per-channel parameters + header
  bool padding_overhead = false;
  std::array<uint64_t, 4> scheme_histogram{};  // cluster codec only
};

struct EvalConfig {
  std::vector<std::string> methods{"fineq", "uniform", "rtn"};
  int bits = 2;  // baseline bit width
  QuantConfig quant;
  uint32_t simulate_cols = 0;  // 0 = no simulation pass
  uint64_t seed = 0;           // seeds the simulation activations
  SimConfig sim;
};

struct EvalReport {
  uint32_t rows = 0;
  uint32_t cols = 0;
  int bits = 2;
  std::vector<MethodReport> methods;
  std::optional<ActivityStats> sim;
  SimConfig sim_config;
};

/// Runs the cluster codec and the requested baselines against the input
/// and, when simulate_cols > 0, one simulated matmul over seeded random
/// activations. Deterministic for a fixed config and thread count caps.
EvalReport run_eval(const FloatTensor& t, const EvalConfig& cfg);

nlohmann::ordered_json to_json(const EvalReport& report);
nlohmann::ordered_json stats_to_json(const ActivityStats& stats,
                                     const SimConfig& cfg);

/// Fixed-width table for terminals; byte-stable for identical reports.
void print_table(std::ostream& os, const EvalReport& report);

}  // namespace fineq
