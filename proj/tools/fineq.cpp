#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fineq/codec.hpp"
#include "fineq/eval.hpp"
#include "fineq/quant.hpp"
#include "fineq/reference.hpp"
#include "fineq/sim.hpp"
#include "fineq/tensor_io.hpp"

namespace {

using fineq::ChannelAxis;
using fineq::Error;
using fineq::ErrorKind;
using fineq::FloatTensor;

std::string num(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

ChannelAxis parse_axis(const std::string& s) {
  if (s == "row") return ChannelAxis::Row;
  if (s == "col") return ChannelAxis::Col;
  throw Error(ErrorKind::InvalidArgument, "channel axis must be row or col");
}

bool is_packed_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 &&
         std::memcmp(magic, fineq::kPackedMagic, 4) == 0;
}

void apply_energy_weights(const std::vector<std::string>& pairs,
                          fineq::EnergyWeights& w) {
  for (const std::string& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidArgument,
                  "energy weight must look like name=value: " + p);
    const std::string key = p.substr(0, eq);
    size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(p.substr(eq + 1), &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad energy weight value: " + p);
    }
    if (used != p.size() - eq - 1)
      throw Error(ErrorKind::InvalidArgument, "bad energy weight value: " + p);
    if (key == "selector")
      w.selector = value;
    else if (key == "adder")
      w.adder = value;
    else if (key == "decoded_cluster")
      w.decoded_cluster = value;
    else if (key == "byte_in")
      w.byte_in = value;
    else if (key == "byte_out")
      w.byte_out = value;
    else
      throw Error(ErrorKind::InvalidArgument, "unknown energy weight: " + key);
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(text.data(), std::streamsize(text.size())))
    throw Error(ErrorKind::Io, "cannot write " + path.string());
}

void print_quant_summary(const FloatTensor& t, const fineq::QuantizedTensor& q) {
  const auto hist = fineq::scheme_histogram(q);
  const fineq::AverageBits bits = fineq::average_bits(q);
  const double file_bits =
      8.0 * double(fineq::packed_file_size(q.rows, q.cols, q.channel_axis)) /
      double(q.rows) / double(q.cols);
  const FloatTensor back = fineq::dequantize_matrix(q);

  std::printf("channels %u  length %u  clusters/channel %u\n",
              q.num_channels(), q.channel_length, q.clusters_per_channel);
  std::printf("schemes  all2 %llu  zero1 %llu  zero2 %llu  zero3 %llu\n",
              (unsigned long long)hist[0], (unsigned long long)hist[1],
              (unsigned long long)hist[2], (unsigned long long)hist[3]);
  std::printf("bits     %s payload  %s stored\n",
              num("%.6f", bits.payload_bits_per_weight).c_str(),
              num("%.6f", file_bits).c_str());
  if (bits.padding_overhead)
    std::printf("note: channel length %u is not a multiple of 24; "
                "padding clusters raise the stored size\n",
                q.channel_length);
  std::printf("mse %s  max_abs_err %s\n",
              num("%.6e", fineq::mse(t, back)).c_str(),
              num("%.6e", fineq::max_abs_err(t, back)).c_str());
}

void print_stats(const fineq::ActivityStats& st, const fineq::SimConfig& cfg) {
  std::printf("cycles   memory_read %llu  decode %llu  preload %llu  "
              "matmul %llu  vector %llu  writeback %llu\n",
              (unsigned long long)st.memory_read_cycles,
              (unsigned long long)st.decode_cycles,
              (unsigned long long)st.preload_cycles,
              (unsigned long long)st.matmul_cycles,
              (unsigned long long)st.vector_cycles,
              (unsigned long long)st.writeback_cycles);
  std::printf("         total_sequential %llu  total_overlapped %llu  "
              "total %llu\n",
              (unsigned long long)st.total_cycles_sequential(),
              (unsigned long long)st.total_cycles_overlapped(),
              (unsigned long long)st.total_cycles(cfg));
  std::printf("counters selector_activations %llu  adder_tree_ops %llu  "
              "decoded_clusters %llu  bytes_in %llu  bytes_out %llu\n",
              (unsigned long long)st.selector_activations,
              (unsigned long long)st.adder_tree_ops,
              (unsigned long long)st.decoded_clusters,
              (unsigned long long)st.bytes_in,
              (unsigned long long)st.bytes_out);
  std::printf("energy   proxy %s  max_abs_partial %s\n",
              num("%.6e", st.energy_proxy(cfg.energy)).c_str(),
              num("%.6e", st.max_abs_partial).c_str());
}

struct GenOpts {
  uint32_t rows = 0;
  uint32_t cols = 0;
  double base_std = 1.0;
  double outlier_frac = 0.0;
  double outlier_mult = 1.0;
  double outlier_density = 0.0;
  uint64_t seed = 0;
  std::string output;
};

struct QuantizeOpts {
  std::string input;
  std::string output;
  std::string axis;
  bool no_harmonize = false;
};

struct DequantizeOpts {
  std::string input;
  std::string output;
};

struct EvalOpts {
  std::string input;
  std::vector<std::string> methods{"fineq", "uniform", "rtn"};
  int bits = 2;
  std::string axis;
  bool no_harmonize = false;
  uint32_t simulate_cols = 0;
  uint64_t seed = 0;
  std::string report;
};

struct SimulateOpts {
  std::string input;
  std::string acts;
  uint32_t random_acts = 0;
  uint64_t seed = 0;
  bool check = false;
  bool no_early_term = false;
  bool overlap = false;
  fineq::SimConfig cfg;
  std::vector<std::string> energy;
  std::string report;
  std::string output;
};

void run_gen(const GenOpts& o) {
  fineq::GenSpec spec;
  spec.rows = o.rows;
  spec.cols = o.cols;
  spec.base_std = o.base_std;
  spec.outlier_channel_fraction = o.outlier_frac;
  spec.outlier_magnitude_mult = o.outlier_mult;
  spec.outlier_density = o.outlier_density;
  spec.seed = o.seed;
  const FloatTensor t = fineq::gen(spec);
  const auto manifest = fineq::save_tensor(t, o.output);
  std::printf("wrote %ux%u tensor to %s\n", t.rows, t.cols,
              manifest.string().c_str());
}

void run_quantize(const QuantizeOpts& o) {
  const FloatTensor t = fineq::load_tensor(o.input);
  fineq::QuantConfig cfg;
  cfg.harmonize = !o.no_harmonize;
  if (!o.axis.empty()) cfg.channel_axis = parse_axis(o.axis);
  const fineq::QuantizedTensor q = fineq::quantize_matrix(t, cfg);
  print_quant_summary(t, q);
  fineq::write_packed(fineq::pack_tensor(q), o.output);
  std::printf("wrote %s\n", o.output.c_str());
}

void run_dequantize(const DequantizeOpts& o) {
  const fineq::PackedTensor p = fineq::read_packed(o.input);
  fineq::UnpackFlags flags;
  const fineq::QuantizedTensor q = fineq::unpack_tensor(p, &flags);
  if (flags.noncanonical_zeros > 0)
    std::printf("note: normalized %llu noncanonical zero fields\n",
                (unsigned long long)flags.noncanonical_zeros);
  const FloatTensor t = fineq::dequantize_matrix(q);
  const auto manifest = fineq::save_tensor(t, o.output);
  std::printf("wrote %ux%u tensor to %s\n", t.rows, t.cols,
              manifest.string().c_str());
}

void run_eval_cmd(const EvalOpts& o) {
  const FloatTensor t = fineq::load_tensor(o.input);
  fineq::EvalConfig cfg;
  cfg.methods = o.methods;
  cfg.bits = o.bits;
  cfg.quant.harmonize = !o.no_harmonize;
  if (!o.axis.empty()) cfg.quant.channel_axis = parse_axis(o.axis);
  cfg.simulate_cols = o.simulate_cols;
  cfg.seed = o.seed;
  const fineq::EvalReport report = fineq::run_eval(t, cfg);
  fineq::print_table(std::cout, report);
  if (report.sim) print_stats(*report.sim, report.sim_config);
  if (!o.report.empty()) {
    write_text(o.report, fineq::to_json(report).dump(2) + "\n");
    std::printf("wrote %s\n", o.report.c_str());
  }
}

void run_simulate(SimulateOpts o) {
  o.cfg.early_termination = !o.no_early_term;
  o.cfg.overlap_stages = o.overlap;
  apply_energy_weights(o.energy, o.cfg.energy);
  if (o.acts.empty() == (o.random_acts == 0))
    throw Error(ErrorKind::InvalidArgument,
                "pass exactly one of --acts and --random-acts");

  std::optional<fineq::PackedTensor> packed;
  std::optional<fineq::QuantizedTensor> quantized;
  if (is_packed_file(o.input)) {
    packed = fineq::read_packed(o.input);
  } else {
    fineq::QuantConfig qcfg;
    qcfg.channel_axis = ChannelAxis::Row;  // one scale per output row
    quantized = fineq::quantize_matrix(fineq::load_tensor(o.input), qcfg);
  }
  const uint32_t k = packed ? packed->channel_length() : quantized->channel_length;

  FloatTensor x;
  if (!o.acts.empty()) {
    x = fineq::load_tensor(o.acts);
  } else {
    fineq::GenSpec spec;
    spec.rows = k;
    spec.cols = o.random_acts;
    spec.seed = o.seed ^ 0x9e3779b97f4a7c15ull;
    x = fineq::gen(spec);
  }

  const fineq::SimResult result = packed
      ? fineq::run_matmul(*packed, x, o.cfg)
      : fineq::run_matmul(*quantized, x, o.cfg);
  print_stats(result.stats, o.cfg);

  if (o.check) {
    const fineq::QuantizedTensor q =
        packed ? fineq::unpack_tensor(*packed) : *quantized;
    const FloatTensor ref =
        fineq::reference_matmul(fineq::dequantize_matrix(q), x);
    std::printf("check    max_rel_err %s\n",
                num("%.6e", fineq::max_rel_error(result.y, ref)).c_str());
  }
  if (!o.report.empty()) {
    write_text(o.report,
               fineq::stats_to_json(result.stats, o.cfg).dump(2) + "\n");
    std::printf("wrote %s\n", o.report.c_str());
  }
  if (!o.output.empty()) {
    const auto manifest = fineq::save_tensor(result.y, o.output);
    std::printf("wrote %ux%u tensor to %s\n", result.y.rows, result.y.cols,
                manifest.string().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fine-grained 2/3-level weight codec and accelerator model"};
  app.require_subcommand(1);

  GenOpts gen_opts;
  auto* sc_gen = app.add_subcommand("gen", "generate a synthetic tensor");
  sc_gen->add_option("--rows", gen_opts.rows)->required();
  sc_gen->add_option("--cols", gen_opts.cols)->required();
  sc_gen->add_option("--base-std", gen_opts.base_std,
                     "Gaussian standard deviation");
  sc_gen->add_option("--outlier-frac", gen_opts.outlier_frac,
                     "fraction of row channels that receive outliers");
  sc_gen->add_option("--outlier-mult", gen_opts.outlier_mult,
                     "magnitude multiplier for outlier entries");
  sc_gen->add_option("--outlier-density", gen_opts.outlier_density,
                     "per-entry outlier probability inside a chosen channel");
  sc_gen->add_option("--seed", gen_opts.seed);
  sc_gen->add_option("-o,--output", gen_opts.output, "manifest path (.json)")
      ->required();
  sc_gen->callback([&] { run_gen(gen_opts); });

  QuantizeOpts quant_opts;
  auto* sc_quant =
      app.add_subcommand("quantize", "quantize a tensor to a packed file");
  sc_quant->add_option("-i,--input", quant_opts.input, "tensor manifest")
      ->required();
  sc_quant->add_option("-o,--output", quant_opts.output, "packed output path")
      ->required();
  sc_quant->add_option("--channel-axis", quant_opts.axis,
                       "row or col (default: manifest setting)");
  sc_quant->add_flag("--no-harmonize", quant_opts.no_harmonize,
                     "resolve scheme pairs by the even cluster instead of "
                     "least squared error");
  sc_quant->callback([&] { run_quantize(quant_opts); });

  DequantizeOpts dequant_opts;
  auto* sc_dequant =
      app.add_subcommand("dequantize", "expand a packed file to a tensor");
  sc_dequant->add_option("-i,--input", dequant_opts.input, "packed file")
      ->required();
  sc_dequant->add_option("-o,--output", dequant_opts.output,
                         "manifest path (.json)")
      ->required();
  sc_dequant->callback([&] { run_dequantize(dequant_opts); });

  EvalOpts eval_opts;
  auto* sc_eval =
      app.add_subcommand("eval", "compare quantizers on a tensor");
  sc_eval->add_option("-i,--input", eval_opts.input, "tensor manifest")
      ->required();
  sc_eval->add_option("--methods", eval_opts.methods,
                      "subset of fineq,uniform,rtn")
      ->delimiter(',');
  sc_eval->add_option("--bits", eval_opts.bits, "baseline bit width [2,8]");
  sc_eval->add_option("--channel-axis", eval_opts.axis,
                      "row or col (default: manifest setting)");
  sc_eval->add_flag("--no-harmonize", eval_opts.no_harmonize);
  sc_eval->add_option("--simulate-cols", eval_opts.simulate_cols,
                      "also simulate a matmul against this many random "
                      "activation columns");
  sc_eval->add_option("--seed", eval_opts.seed, "activation seed");
  sc_eval->add_option("--report", eval_opts.report, "JSON report path");
  sc_eval->callback([&] { run_eval_cmd(eval_opts); });

  SimulateOpts sim_opts;
  auto* sc_sim = app.add_subcommand(
      "simulate", "run a matmul on the accelerator model");
  sc_sim->add_option("-i,--input", sim_opts.input,
                     "packed file or tensor manifest")
      ->required();
  sc_sim->add_option("--acts", sim_opts.acts, "activation tensor manifest");
  sc_sim->add_option("--random-acts", sim_opts.random_acts,
                     "generate this many random activation columns");
  sc_sim->add_option("--seed", sim_opts.seed, "activation seed");
  sc_sim->add_flag("--check", sim_opts.check,
                   "compare against a double-precision matmul");
  sc_sim->add_flag("--no-early-term", sim_opts.no_early_term,
                   "always stream bitstream_max_len cycles per row group");
  sc_sim->add_flag("--overlap", sim_opts.overlap,
                   "report the overlapped-stage total as the bottom line");
  sc_sim->add_option("--array-rows", sim_opts.cfg.array_rows);
  sc_sim->add_option("--array-cols", sim_opts.cfg.array_cols);
  sc_sim->add_option("--decoders", sim_opts.cfg.decoders);
  sc_sim->add_option("--mem-bytes-per-cycle", sim_opts.cfg.mem_bytes_per_cycle);
  sc_sim->add_option("--energy-weight", sim_opts.energy,
                     "name=value; names: selector, adder, decoded_cluster, "
                     "byte_in, byte_out");
  sc_sim->add_option("--report", sim_opts.report, "JSON stats path");
  sc_sim->add_option("-o,--output", sim_opts.output,
                     "write the result tensor here (.json)");
  sc_sim->callback([&] { run_simulate(sim_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
