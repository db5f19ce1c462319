#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "fineq/baselines.hpp"
#include "fineq/codec.hpp"
#include "fineq/eval.hpp"
#include "fineq/parallel.hpp"
#include "fineq/quant.hpp"
#include "fineq/reference.hpp"

namespace {

double ms_since(std::chrono::steady_clock::time_point start) {
  const auto d = std::chrono::steady_clock::now() - start;
  return std::chrono::duration<double, std::milli>(d).count();
}

// Runs both implementations, checks they agree, prints the two timings.
template <class Par, class Ser>
void bench(const char* name, Par par, Ser ser) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = par();
  const double par_ms = ms_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  const auto b = ser();
  const double ser_ms = ms_since(t1);

  if (!(a == b)) {
    std::fprintf(stderr, "%s: parallel and serial results differ\n", name);
    std::exit(1);
  }
  std::printf("%-18s parallel %9.2f ms   serial %9.2f ms   speedup %5.2fx\n",
              name, par_ms, ser_ms, ser_ms / par_ms);
}

}  // namespace

int main(int argc, char** argv) {
  uint32_t rows = 1024, cols = 2048, n = 256;
  if (argc >= 3) {
    rows = uint32_t(std::strtoul(argv[1], nullptr, 10));
    cols = uint32_t(std::strtoul(argv[2], nullptr, 10));
  }
  if (argc >= 4) n = uint32_t(std::strtoul(argv[3], nullptr, 10));

  std::printf("tensor %ux%u, activations %ux%u, threads %d\n", rows, cols,
              cols, n, fineq::max_threads());

  fineq::GenSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.outlier_channel_fraction = 0.1;
  spec.outlier_magnitude_mult = 8.0;
  spec.outlier_density = 0.1;
  spec.seed = 7;
  const fineq::FloatTensor t = fineq::gen(spec);

  const fineq::QuantizedTensor q = fineq::quantize_matrix(t);
  const fineq::PackedTensor p = fineq::pack_tensor(q);

  fineq::GenSpec aspec;
  aspec.rows = cols;
  aspec.cols = n;
  aspec.seed = 11;
  const fineq::FloatTensor x = fineq::gen(aspec);

  bench("quantize", [&] { return fineq::quantize_matrix(t); },
        [&] { return fineq::serial::quantize_matrix(t); });
  bench("dequantize", [&] { return fineq::dequantize_matrix(q); },
        [&] { return fineq::serial::dequantize_matrix(q); });
  bench("pack", [&] { return fineq::pack_tensor(q); },
        [&] { return fineq::serial::pack_tensor(q); });
  bench("unpack", [&] { return fineq::unpack_tensor(p); },
        [&] { return fineq::serial::unpack_tensor(p); });
  bench("uniform", [&] { return fineq::uniform_quantize(t, 2); },
        [&] { return fineq::serial::uniform_quantize(t, 2); });
  bench("rtn", [&] { return fineq::rtn_quantize(t, 2); },
        [&] { return fineq::serial::rtn_quantize(t, 2); });
  bench("matmul", [&] { return fineq::reference_matmul(t, x); },
        [&] { return fineq::serial::reference_matmul(t, x); });
  return 0;
}
