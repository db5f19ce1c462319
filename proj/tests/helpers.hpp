#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <doctest.h>

#include "fineq/eval.hpp"
#include "fineq/types.hpp"

namespace testutil {

/// Runs f, which must throw fineq::Error, and returns the error kind.
template <class F>
fineq::ErrorKind thrown_kind(F&& f) {
  try {
    std::forward<F>(f)();
  } catch (const fineq::Error& e) {
    return e.kind();
  }
  FAIL("expected a fineq::Error");
  return fineq::ErrorKind::Internal;
}

inline fineq::FloatTensor rand_tensor(uint32_t rows, uint32_t cols,
                                      uint64_t seed, bool outliers = false) {
  fineq::GenSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.seed = seed;
  if (outliers) {
    spec.outlier_channel_fraction = 0.1;
    spec.outlier_magnitude_mult = 8.0;
    spec.outlier_density = 0.1;
  }
  return fineq::gen(spec);
}

/// Scoped FINEQ_THREADS override; restores the previous value on exit.
class ScopedThreads {
public:
  explicit ScopedThreads(const char* value) {
    if (const char* old = std::getenv("FINEQ_THREADS")) previous_ = old;
    if (value)
      setenv("FINEQ_THREADS", value, 1);
    else
      unsetenv("FINEQ_THREADS");
  }
  ~ScopedThreads() {
    if (previous_)
      setenv("FINEQ_THREADS", previous_->c_str(), 1);
    else
      unsetenv("FINEQ_THREADS");
  }

private:
  std::optional<std::string> previous_;
};

/// Fresh directory under the system temp root, removed on scope exit.
class ScopedTempDir {
public:
  explicit ScopedTempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScopedTempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace testutil
