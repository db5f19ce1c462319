// Acceptance gate: ten behavioral criteria, each timed against a budget.
// Usage: acceptance <path-to-fineq-cli>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fineq/baselines.hpp"
#include "fineq/codec.hpp"
#include "fineq/eval.hpp"
#include "fineq/quant.hpp"
#include "fineq/sim.hpp"

namespace fs = std::filesystem;
using fineq::ChannelAxis;
using fineq::Cluster;
using fineq::FloatTensor;
using fineq::PackedBlock;
using fineq::QuantizedCluster;
using fineq::QuantizedTensor;
using fineq::SchemeCode;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

FloatTensor rnd(uint32_t rows, uint32_t cols, uint64_t seed, bool outliers) {
  fineq::GenSpec s;
  s.rows = rows;
  s.cols = cols;
  s.seed = seed;
  if (outliers) {
    s.outlier_channel_fraction = 0.1;
    s.outlier_magnitude_mult = 8.0;
    s.outlier_density = 0.1;
  }
  return fineq::gen(s);
}

std::array<int8_t, 24> flat_unpack(const PackedBlock& b) {
  const auto cs = fineq::unpack_block(b);
  std::array<int8_t, 24> w{};
  for (int c = 0; c < 8; ++c)
    for (int p = 0; p < 3; ++p) w[size_t(c * 3 + p)] = cs[size_t(c)].q[size_t(p)];
  return w;
}

// 1. Payload cost is exactly 56 bits per 24 weights whenever channels
//    fill whole blocks, regardless of shape or axis.
void criterion_1() {
  const struct { uint32_t r, c; ChannelAxis axis; } shapes[] = {
      {1, 24, ChannelAxis::Row},  {5, 48, ChannelAxis::Row},
      {24, 5, ChannelAxis::Col},  {7, 240, ChannelAxis::Row},
      {128, 96, ChannelAxis::Row}, {48, 3, ChannelAxis::Col},
  };
  uint64_t seed = 1;
  for (const auto& s : shapes) {
    ++seed;
    FloatTensor t = rnd(s.r, s.c, seed, seed % 2 == 0);
    t.channel_axis = s.axis;
    const fineq::AverageBits ab = fineq::average_bits(fineq::quantize_matrix(t));
    require(ab.payload_bits_per_weight == 56.0 / 24.0,
            "payload bits deviate from 56/24");
    require(!ab.padding_overhead, "padding flagged on a block-aligned shape");
  }
  const fineq::AverageBits odd =
      fineq::average_bits(fineq::quantize_matrix(rnd(1, 25, 9, false)));
  require(odd.payload_bits_per_weight > 56.0 / 24.0 && odd.padding_overhead,
          "padding must inflate non-aligned shapes");
}

// 2. Codec roundtrip identity: all 4 schemes x 64 payload values per
//    cluster, plus 1000 randomized quantized tensors.
void criterion_2() {
  for (int scheme = 0; scheme < 4; ++scheme)
    for (uint32_t field = 0; field < 64; ++field) {
      PackedBlock b;
      b.index = uint8_t(scheme << 6);
      b.payload = {uint8_t(field << 2), 0, 0, 0, 0, 0};
      fineq::UnpackFlags flags;
      const auto cs = fineq::unpack_block(b, &flags);
      const PackedBlock repacked = fineq::pack_block(cs);
      require(fineq::unpack_block(repacked) == cs,
              "cluster values changed across a roundtrip");
      if (flags.noncanonical_zeros == 0)
        require(repacked == b, "canonical bytes changed across a roundtrip");
    }

  std::mt19937_64 rs(20240202);
  for (int i = 0; i < 1000; ++i) {
    const uint32_t rows = 1 + uint32_t(rs() % 10);
    const uint32_t cols = 1 + uint32_t(rs() % 64);
    const QuantizedTensor q =
        fineq::quantize_matrix(rnd(rows, cols, rs(), i % 3 == 0));
    const fineq::PackedTensor p = fineq::pack_tensor(q);
    require(fineq::unpack_tensor(p) == q, "tensor roundtrip lost values");
    require(fineq::pack_tensor(fineq::unpack_tensor(p)) == p,
            "packed bytes are not a fixed point");
  }
}

// 3. The hardware decoder agrees with the software codec bit for bit.
void criterion_3() {
  for (int scheme = 0; scheme < 4; ++scheme)
    for (uint32_t field = 0; field < 64; ++field)
      for (uint32_t ci = 0; ci < 8; ++ci) {
        PackedBlock b;
        b.index = uint8_t(scheme << (6 - 2 * (ci / 2)));
        const uint64_t bits = uint64_t(field) << (42 - 6 * ci);
        for (int i = 0; i < 6; ++i)
          b.payload[size_t(i)] = uint8_t(bits >> (40 - 8 * i));
        require(fineq::hw_decode(b) == flat_unpack(b),
                "decoder mismatch on a crafted block");
      }

  std::mt19937_64 rs(77);
  for (int i = 0; i < 10000; ++i) {
    PackedBlock b;
    b.index = uint8_t(rs());
    for (auto& byte : b.payload) byte = uint8_t(rs());
    require(fineq::hw_decode(b) == flat_unpack(b),
            "decoder mismatch on a random block");
  }
}

// 4. The simulated matmul matches a dense double-precision oracle within
//    1e-4 norm-relative error over 100 random shapes in [1, 256]^3.
void criterion_4() {
  std::mt19937_64 rs(424242);
  for (int i = 0; i < 100; ++i) {
    const uint32_t m = 1 + uint32_t(rs() % 256);
    const uint32_t k = 1 + uint32_t(rs() % 256);
    const uint32_t n = 1 + uint32_t(rs() % 256);
    const QuantizedTensor q = fineq::quantize_matrix(rnd(m, k, rs(), i % 2 == 0));
    const FloatTensor x = rnd(k, n, rs(), false);

    const FloatTensor y = (i % 4 == 0)
                              ? fineq::run_matmul(fineq::pack_tensor(q), x,
                                                  fineq::SimConfig{})
                                    .y
                              : fineq::run_matmul(q, x, fineq::SimConfig{}).y;

    const FloatTensor w = fineq::dequantize_matrix(q);
    double dmax = 0.0, rmax = 0.0;
    for (uint32_t r = 0; r < m; ++r)
      for (uint32_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (uint32_t j = 0; j < k; ++j)
          acc += double(w.at(r, j)) * double(x.at(j, c));
        dmax = std::max(dmax, std::fabs(double(y.at(r, c)) - acc));
        rmax = std::max(rmax, std::fabs(acc));
      }
    const double rel = rmax > 0.0 ? dmax / rmax : (dmax == 0.0 ? 0.0 : 1.0);
    require(rel <= 1e-4, "simulated product drifted from the oracle");
  }
}

// 5. Simulated matmul cycles equal the closed-form estimate exactly on 50
//    random shapes, with and without early termination, and early
//    termination never changes the product.
void criterion_5() {
  std::mt19937_64 rs(5150);
  for (int i = 0; i < 50; ++i) {
    const uint32_t m = 1 + uint32_t(rs() % 160);
    const uint32_t k = 1 + uint32_t(rs() % 160);
    const uint32_t n = 1 + uint32_t(rs() % 160);
    const QuantizedTensor q = fineq::quantize_matrix(rnd(m, k, rs(), true));
    const FloatTensor x = rnd(k, n, rs(), false);

    FloatTensor y_on, y_off;
    for (const bool et : {true, false}) {
      fineq::SimConfig cfg;
      cfg.early_termination = et;
      const fineq::SimResult r = fineq::run_matmul(q, x, cfg);
      require(r.stats.matmul_cycles ==
                  fineq::estimate(q, n, cfg).matmul_cycles,
              "matmul cycles deviate from the closed form");
      (et ? y_on : y_off) = r.y;
    }
    require(y_on == y_off, "early termination changed the product");
  }
}

// 6. Temporal coding emits exactly `magnitude` ones for every magnitude
//    and group length, and the group length rule matches.
void criterion_6() {
  for (uint32_t len = 1; len <= 3; ++len)
    for (uint32_t mag = 0; mag <= len; ++mag) {
      const fineq::Bitstream s = fineq::temporal_encode(mag, len, -1);
      uint32_t ones = 0;
      for (uint32_t t = 0; t < len; ++t) {
        require(s.bit(t) == (t < mag), "ones are not a prefix");
        ones += s.bit(t) ? 1u : 0u;
      }
      require(ones == mag, "ones count deviates from the magnitude");
    }
  fineq::SimConfig cfg;
  for (uint32_t mag = 0; mag <= 3; ++mag) {
    require(fineq::group_length(mag, cfg) == std::max(1u, mag),
            "early-terminated group length is wrong");
    cfg.early_termination = false;
    require(fineq::group_length(mag, cfg) == 3, "full group length is wrong");
    cfg.early_termination = true;
  }
}

// 7. On 512x512 outlier-heavy tensors (mult 8, fraction 0.1, 50 seeds)
//    the cluster codec beats uniform 2-bit MSE on >= 48 seeds, and every
//    surviving value reconstructs within half a 3-bit step.
void criterion_7() {
  int wins = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    const FloatTensor t = rnd(512, 512, 7000 + seed, true);
    const QuantizedTensor q = fineq::quantize_matrix(t);
    const double mse_fineq = fineq::mse(t, fineq::dequantize_matrix(q));
    const double mse_u2 = fineq::mse(t, fineq::uniform_quantize(t, 2));
    wins += mse_fineq < mse_u2 ? 1 : 0;

    for (uint32_t ch = 0; ch < 512; ++ch) {
      const double s3 = double(q.scales[ch]);
      const double bound = 0.5 * s3 * (1.0 + 1e-12);
      const auto clusters = q.channel_clusters(ch);
      for (uint32_t ci = 0; ci < clusters.size(); ++ci) {
        const QuantizedCluster& qc = clusters[ci];
        if (qc.scheme == SchemeCode::All2) continue;
        const uint32_t zp = uint32_t(qc.scheme) - 1;
        for (uint32_t pos = 0; pos < 3; ++pos) {
          const uint32_t j = ci * 3 + pos;
          if (pos == zp || j >= 512) continue;
          const double err =
              std::fabs(double(t.at(ch, j)) - double(qc.q[pos]) * s3);
          require(err <= bound, "a survivor missed the half-step bound");
        }
      }
    }
  }
  require(wins >= 48, "uniform 2-bit won too often: " + std::to_string(50 - wins) +
                          " losses");
}

// 8. For 10^4 random disagreeing cluster pairs the harmonized scheme's
//    joint squared error is minimal among all four schemes.
void criterion_8() {
  std::mt19937_64 rs(88);
  auto val = [&rs]() {
    const uint64_t r = rs();
    float v = float(double(r % 20001) / 10000.0 - 1.0);
    if (r % 7 == 0) v = 0.0f;
    if (r % 11 == 0) v *= 16.0f;
    return v;
  };

  int checked = 0;
  while (checked < 10000) {
    Cluster a{val(), val(), val()};
    Cluster b{val(), val(), val()};
    if (fineq::select_scheme(a) == fineq::select_scheme(b)) continue;

    float amax = 0.0f;
    for (float v : a) amax = std::max(amax, std::fabs(v));
    for (float v : b) amax = std::max(amax, std::fabs(v));
    const fineq::ChannelQuantParams p{amax / 3.0f};

    const SchemeCode chosen = fineq::harmonize_pair(a, b, p);
    const double chosen_loss = fineq::pair_loss(a, b, chosen, p);
    for (int s = 0; s < 4; ++s)
      require(chosen_loss <= fineq::pair_loss(a, b, SchemeCode(s), p),
              "harmonization picked a non-minimal scheme");
    ++checked;
  }
}

// 9. Scheme selection matches a brute-force magnitude-rule oracle on
//    10^5 random clusters including ties, zeros and exact 4x boundaries.
void criterion_9() {
  auto oracle = [](const Cluster& c) {
    const double m[3] = {std::fabs(double(c[0])), std::fabs(double(c[1])),
                         std::fabs(double(c[2]))};
    const double mx = std::max({m[0], m[1], m[2]});
    const double mn = std::min({m[0], m[1], m[2]});
    if (!(mx > 4.0 * mn)) return SchemeCode::All2;
    int k = 0;
    for (int j = 1; j < 3; ++j)
      if (m[j] < m[k]) k = j;
    return SchemeCode(k + 1);
  };

  std::mt19937_64 rs(99);
  for (int i = 0; i < 100000; ++i) {
    Cluster c;
    for (int j = 0; j < 3; ++j) {
      const uint64_t r = rs();
      float v = float(double(r % 2001) / 1000.0 - 1.0);
      if (r % 5 == 0) v = 0.0f;
      if (r % 9 == 0 && j > 0) v = c[j - 1];         // exact tie
      if (r % 13 == 0 && j > 0) v = 4.0f * c[j - 1]; // exact 4x boundary
      if (r % 17 == 0) v *= 32.0f;
      c[j] = v;
    }
    require(fineq::select_scheme(c) == oracle(c),
            "scheme selection deviates from the oracle");
  }
}

// 10. Every CLI command with a fixed seed produces byte-identical output
//     files and terminal text under FINEQ_THREADS=1 and 8.
void criterion_10(const std::string& cli_arg) {
  require(!cli_arg.empty(), "usage: acceptance <path-to-fineq-cli>");
  require(fs::exists(cli_arg), "CLI binary not found: " + cli_arg);
  // The commands below run after a cd, so the path must survive it.
  const std::string cli = fs::absolute(cli_arg).string();

  struct TempTree {
    fs::path root;
    TempTree() {
      root = fs::temp_directory_path() /
             ("fineq_accept_" + std::to_string(::getpid()));
      fs::remove_all(root);
      fs::create_directories(root / "t1");
      fs::create_directories(root / "t8");
    }
    ~TempTree() {
      std::error_code ec;
      fs::remove_all(root, ec);
    }
  } tree;

  const std::vector<std::string> steps = {
      "gen --rows 96 --cols 120 --outlier-frac 0.1 --outlier-mult 8 "
      "--outlier-density 0.2 --seed 42 -o w.json",
      "quantize -i w.json -o w.finq",
      "dequantize -i w.finq -o wd.json",
      "eval -i w.json --bits 3 --simulate-cols 40 --seed 7 "
      "--report report.json",
      "simulate -i w.finq --random-acts 24 --seed 9 --check "
      "--report sim.json -o y.json",
  };

  for (const char* threads : {"1", "8"}) {
    const fs::path dir = tree.root / (std::string("t") + threads);
    for (size_t i = 0; i < steps.size(); ++i) {
      std::ostringstream cmd;
      cmd << "cd '" << dir.string() << "' && env FINEQ_THREADS=" << threads
          << " '" << cli << "' " << steps[i] << " > out" << i + 1
          << ".txt 2>&1";
      require(std::system(cmd.str().c_str()) == 0,
              "command failed under FINEQ_THREADS=" + std::string(threads) +
                  ": " + steps[i]);
    }
  }

  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    require(f.good(), "missing artifact " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const std::vector<std::string> artifacts = {
      "out1.txt", "out2.txt", "out3.txt", "out4.txt",    "out5.txt",
      "w.json",   "w.bin",    "w.finq",   "wd.json",     "wd.bin",
      "report.json", "sim.json", "y.json", "y.bin",
  };
  for (const std::string& name : artifacts)
    require(slurp(tree.root / "t1" / name) == slurp(tree.root / "t8" / name),
            name + " differs between thread counts");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  struct Entry {
    int id;
    const char* what;
    double budget_s;
    std::function<void()> run;
  };
  const std::vector<Entry> criteria = {
      {1, "block-aligned channels average exactly 56/24 payload bits", 1.0,
       criterion_1},
      {2, "codec roundtrips all 256 cluster cases and 1000 random tensors",
       10.0, criterion_2},
      {3, "hardware decoder equals the software codec on every block", 10.0,
       criterion_3},
      {4, "simulated matmul tracks the dense oracle within 1e-4", 60.0,
       criterion_4},
      {5, "simulated cycles equal the closed-form estimate exactly", 30.0,
       criterion_5},
      {6, "temporal streams carry exactly their magnitude in ones", 10.0,
       criterion_6},
      {7, "cluster codec beats uniform 2-bit on outlier tensors", 120.0,
       criterion_7},
      {8, "harmonization always picks a minimum-loss scheme", 10.0,
       criterion_8},
      {9, "scheme selection matches the magnitude-rule oracle", 30.0,
       criterion_9},
      {10, "CLI output is byte-identical across thread counts", 300.0,
       [&cli] { criterion_10(cli); }},
  };

  int failures = 0;
  for (const Entry& e : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      e.run();
    } catch (const std::exception& ex) {
      error = ex.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (error.empty() && secs > e.budget_s) error = "over time budget";

    const bool pass = error.empty();
    std::printf("%s criterion %2d: %s (%.2fs, budget %.0fs)%s%s\n",
                pass ? "PASS" : "FAIL", e.id, e.what, secs, e.budget_s,
                pass ? "" : " - ", error.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
  }

  if (failures == 0)
    std::printf("all 10 criteria passed\n");
  else
    std::printf("%d of 10 criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
