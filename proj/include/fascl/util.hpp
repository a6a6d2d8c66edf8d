#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fascl {

// ---------------------------------------------------------------------------
// Errors. Every failure mode carries a short machine-readable kind that the
// CLI maps onto its error line.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

private:
  std::string kind_;
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t line)
      : Error("parse", msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class DataError : public Error {
public:
  explicit DataError(const std::string& msg) : Error("data", msg) {}
};

class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

class NotFoundError : public Error {
public:
  explicit NotFoundError(const std::string& msg) : Error("not_found", msg) {}
};

class CoverageError : public Error {
public:
  explicit CoverageError(const std::string& msg) : Error("coverage", msg) {}
};

class DegenerateError : public Error {
public:
  explicit DegenerateError(const std::string& msg) : Error("degenerate", msg) {}
};

class InsufficientDataError : public Error {
public:
  explicit InsufficientDataError(const std::string& msg)
      : Error("insufficient_data", msg) {}
};

class TrainAbort : public Error {
public:
  explicit TrainAbort(const std::string& msg) : Error("train_abort", msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 with hand-rolled mappings so streams do not
// depend on the standard library's distribution implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double u01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; second deviate cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - u01();  // (0, 1]
    double u2 = u01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // N(0, sd^2) truncated to [-limit*sd, limit*sd] by rejection.
  double trunc_normal(double sd, double limit = 2.0) {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= limit) return z * sd;
    }
  }

  // Uniform integer in [0, n); unbiased via rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ConfigError("uniform_index: n must be positive");
    std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= bound);
    return static_cast<std::size_t>(x % n);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // k distinct indices from [0, n), partial Fisher-Yates, order random.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Worker-thread control. FASCL_THREADS caps parallelism process-wide.
// ---------------------------------------------------------------------------

int worker_threads();

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Chunk boundaries depend only on (n, worker count), so per-item
// outputs are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Same, but fn also receives the chunk index so callers can keep per-chunk
// accumulators and reduce them in chunk order.
void parallel_for_chunked(
    std::size_t n, std::size_t max_chunks,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Numerics.
// ---------------------------------------------------------------------------

// Double-precision erf on arrays, rational (Cephes-style) approximation,
// vectorizes through Eigen. Matches std::erf to a few ULP.
void erf_inplace(Eigen::ArrayXXd& x);
double erf_scalar(double x);

// Exact (erf-based) GELU and its derivative.
void gelu_inplace(Eigen::ArrayXXd& x);
Eigen::ArrayXXd gelu_grad(const Eigen::ArrayXXd& pre);

// Pearson correlation of two equal-length series. Rows with standard
// deviation below `degenerate_eps` yield 0 (shared kernel rule).
double pearson_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double degenerate_eps = 1e-12);

// Sample (n-1) standard deviation.
double sample_std(const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Small text helpers.
// ---------------------------------------------------------------------------

std::string format_double(double v);  // shortest round-trip decimal
std::vector<std::string> split_csv_line(const std::string& line);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace fascl
