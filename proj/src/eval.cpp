#include "fineq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "fineq/baselines.hpp"
#include "fineq/codec.hpp"

namespace fineq {

namespace {

// Gaussian source with explicitly pinned bit mappings so generated data
// is identical across standard libraries and platforms.
class GaussianSource {
public:
  explicit GaussianSource(uint64_t seed) : rng_(seed) {}

  double uniform01() {  // [0, 1)
    return double(rng_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {  // Box-Muller, pair cached
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = double((rng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  uint64_t below(uint64_t n) { return rng_() % n; }

private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

void validate_spec(const GenSpec& s) {
  if (s.rows == 0 || s.cols == 0)
    throw Error(ErrorKind::InvalidArgument, "rows and cols must be >= 1");
  if (!(s.base_std >= 0.0) || !std::isfinite(s.base_std))
    throw Error(ErrorKind::InvalidArgument, "base_std must be finite and >= 0");
  if (!(s.outlier_channel_fraction >= 0.0 && s.outlier_channel_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument,
                "outlier_channel_fraction must lie in [0, 1]");
  if (!(s.outlier_density >= 0.0 && s.outlier_density <= 1.0))
    throw Error(ErrorKind::InvalidArgument,
                "outlier_density must lie in [0, 1]");
  if (!(s.outlier_magnitude_mult >= 1.0) ||
      !std::isfinite(s.outlier_magnitude_mult))
    throw Error(ErrorKind::InvalidArgument,
                "outlier_magnitude_mult must be finite and >= 1");
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

MethodReport fineq_report(const FloatTensor& t, const QuantConfig& qcfg) {
  const QuantizedTensor q = quantize_matrix(t, qcfg);
  const FloatTensor back = dequantize_matrix(q);
  const AverageBits bits = average_bits(q);
  const double weights = double(t.size());

  MethodReport r;
  r.method = "fineq";
  r.mse = mse(t, back);
  r.max_abs_err = max_abs_err(t, back);
  r.avg_bits_payload = bits.payload_bits_per_weight;
  r.avg_bits_total =
      bits.payload_bits_per_weight +
      (32.0 * q.num_channels() + 8.0 * kPackedHeaderBytes) / weights;
  r.padding_overhead = bits.padding_overhead;
  r.scheme_histogram = scheme_histogram(q);
  return r;
}

MethodReport baseline_report(const FloatTensor& t, const std::string& method,
                             int bits) {
  MethodReport r;
  r.method = method;
  FloatTensor back = method == "uniform" ? uniform_quantize(t, bits)
                                         : rtn_quantize(t, bits);
  r.mse = mse(t, back);
  r.max_abs_err = max_abs_err(t, back);
  r.avg_bits_payload = double(bits);
  // Per-channel f32 scale for the symmetric grid; f32 scale plus i32 zero
  // point per row for the asymmetric one.
  const double weights = double(t.size());
  const double params = method == "uniform" ? 32.0 * t.num_channels()
                                            : 64.0 * t.rows;
  r.avg_bits_total = double(bits) + params / weights;
  return r;
}

}  // namespace

FloatTensor gen(const GenSpec& spec) {
  validate_spec(spec);
  GaussianSource src(spec.seed);

  FloatTensor t(spec.rows, spec.cols, ChannelAxis::Row);
  for (uint64_t i = 0; i < t.size(); ++i)
    t.data[i] = float(spec.base_std * src.gaussian());

  const uint32_t channels = t.num_channels();
  const auto count =
      uint64_t(std::llround(spec.outlier_channel_fraction * channels));
  if (count == 0) return t;

  std::vector<uint32_t> order(channels);
  for (uint32_t i = 0; i < channels; ++i) order[i] = i;
  for (uint32_t i = channels - 1; i > 0; --i)
    std::swap(order[i], order[src.below(i + 1)]);
  std::vector<uint32_t> chosen(order.begin(), order.begin() + count);
  std::sort(chosen.begin(), chosen.end());

  for (uint32_t ch : chosen)
    for (uint32_t j = 0; j < t.cols; ++j)
      if (src.uniform01() < spec.outlier_density)
        t.at(ch, j) = float(double(t.at(ch, j)) * spec.outlier_magnitude_mult);
  return t;
}

double mse(const FloatTensor& a, const FloatTensor& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw Error(ErrorKind::DimMismatch, "shape mismatch in mse");
  double sum = 0.0;
  for (uint64_t i = 0; i < a.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    sum += d * d;
  }
  return sum / double(a.size());
}

double max_abs_err(const FloatTensor& a, const FloatTensor& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw Error(ErrorKind::DimMismatch, "shape mismatch in max_abs_err");
  double m = 0.0;
  for (uint64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(double(a.data[i]) - double(b.data[i])));
  return m;
}

EvalReport run_eval(const FloatTensor& t, const EvalConfig& cfg) {
  if (t.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "cannot evaluate an empty tensor");
  if (cfg.methods.empty())
    throw Error(ErrorKind::InvalidArgument, "no methods requested");
  require_finite(t);

  EvalReport report;
  report.rows = t.rows;
  report.cols = t.cols;
  report.bits = cfg.bits;
  report.sim_config = cfg.sim;

  for (const std::string& m : cfg.methods) {
    if (m == "fineq")
      report.methods.push_back(fineq_report(t, cfg.quant));
    else if (m == "uniform" || m == "rtn")
      report.methods.push_back(baseline_report(t, m, cfg.bits));
    else
      throw Error(ErrorKind::InvalidArgument, "unknown method " + m);
  }

  if (cfg.simulate_cols > 0) {
    QuantConfig qcfg = cfg.quant;
    qcfg.channel_axis = ChannelAxis::Row;  // one scale per output row
    const QuantizedTensor q = quantize_matrix(t, qcfg);
    GenSpec acts;
    acts.rows = q.channel_length;
    acts.cols = cfg.simulate_cols;
    acts.base_std = 1.0;
    acts.seed = cfg.seed ^ 0x9e3779b97f4a7c15ull;
    report.sim = run_matmul(q, gen(acts), cfg.sim).stats;
  }
  return report;
}

nlohmann::ordered_json stats_to_json(const ActivityStats& st,
                                     const SimConfig& cfg) {
  nlohmann::ordered_json j;
  j["cycles"] = {{"memory_read", st.memory_read_cycles},
                 {"decode", st.decode_cycles},
                 {"preload", st.preload_cycles},
                 {"matmul", st.matmul_cycles},
                 {"vector", st.vector_cycles},
                 {"writeback", st.writeback_cycles},
                 {"total_sequential", st.total_cycles_sequential()},
                 {"total_overlapped", st.total_cycles_overlapped()},
                 {"total", st.total_cycles(cfg)}};
  j["counters"] = {{"selector_activations", st.selector_activations},
                   {"adder_tree_ops", st.adder_tree_ops},
                   {"decoded_clusters", st.decoded_clusters},
                   {"bytes_in", st.bytes_in},
                   {"bytes_out", st.bytes_out}};
  j["max_abs_partial"] = st.max_abs_partial;
  j["energy"] = {{"weights",
                  {{"selector", cfg.energy.selector},
                   {"adder", cfg.energy.adder},
                   {"decoded_cluster", cfg.energy.decoded_cluster},
                   {"byte_in", cfg.energy.byte_in},
                   {"byte_out", cfg.energy.byte_out}}},
                 {"proxy", st.energy_proxy(cfg.energy)}};
  return j;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["rows"] = report.rows;
  j["cols"] = report.cols;
  j["baseline_bits"] = report.bits;
  j["methods"] = nlohmann::ordered_json::array();
  for (const MethodReport& m : report.methods) {
    nlohmann::ordered_json e;
    e["method"] = m.method;
    e["mse"] = m.mse;
    e["max_abs_err"] = m.max_abs_err;
    e["avg_bits_payload"] = m.avg_bits_payload;
    e["avg_bits_total"] = m.avg_bits_total;
    if (m.method == "fineq") {
      e["padding_overhead"] = m.padding_overhead;
      e["scheme_histogram"] = {{"all2", m.scheme_histogram[0]},
                               {"zero_first", m.scheme_histogram[1]},
                               {"zero_second", m.scheme_histogram[2]},
                               {"zero_third", m.scheme_histogram[3]}};
    }
    j["methods"].push_back(e);
  }
  if (report.sim) j["sim"] = stats_to_json(*report.sim, report.sim_config);
  return j;
}

void print_table(std::ostream& os, const EvalReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-8s  %-14s  %-14s  %-9s  %-9s\n",
                "method", "mse", "max_abs_err", "bits", "bits_total");
  os << line;
  for (const MethodReport& m : report.methods) {
    std::snprintf(line, sizeof line, "%-8s  %-14s  %-14s  %-9s  %-9s\n",
                  m.method.c_str(), fmt("%.6e", m.mse).c_str(),
                  fmt("%.6e", m.max_abs_err).c_str(),
                  fmt("%.4f", m.avg_bits_payload).c_str(),
                  fmt("%.4f", m.avg_bits_total).c_str());
    os << line;
    if (m.method == "fineq") {
      std::snprintf(line, sizeof line,
                    "%-8s  schemes all2=%llu zero1=%llu zero2=%llu zero3=%llu%s\n",
                    "", (unsigned long long)m.scheme_histogram[0],
                    (unsigned long long)m.scheme_histogram[1],
                    (unsigned long long)m.scheme_histogram[2],
                    (unsigned long long)m.scheme_histogram[3],
                    m.padding_overhead ? "  (padding overhead)" : "");
      os << line;
    }
  }
}

}  // namespace fineq
