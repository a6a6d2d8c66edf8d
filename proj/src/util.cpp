#include "fascl/util.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <thread>

namespace fascl {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw ConfigError("sample_without_replacement: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

int worker_threads() {
  static const int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("FASCL_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) n = std::min(n, cap);
    }
    return n;
  }();
  return cached;
}

void parallel_for_chunked(
    std::size_t n, std::size_t max_chunks,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t chunks = std::min<std::size_t>(max_chunks, n);
  if (chunks <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  std::size_t base = n / chunks, rem = n % chunks, begin = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t len = base + (c < rem ? 1 : 0);
    std::size_t end = begin + len;
    pool.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  parallel_for_chunked(n, static_cast<std::size_t>(worker_threads()),
                       [&fn](std::size_t, std::size_t b, std::size_t e) { fn(b, e); });
}

// ---------------------------------------------------------------------------
// erf: rational approximations from the Cephes library (public domain).
// |x| < 1        : x * T(x^2) / U(x^2)
// 1 <= |x| < 6   : 1 - exp(-x^2) * P(|x|) / Q(|x|)
// |x| >= 6       : +-1 (saturated to double precision)
// Branchless over arrays: all branches evaluated, blended with selects.
// ---------------------------------------------------------------------------

namespace {

template <class A>
auto polevl_T(const A& z) {
  return ((((9.60497373987051638749e0 * z + 9.00260197203842689217e1) * z +
            2.23200534594684319226e3) *
               z +
           7.00332514112805075473e3) *
              z +
          5.55923013010394962768e4);
}

template <class A>
auto polevl_U(const A& z) {
  return (((((z + 3.35617141647503099647e1) * z + 5.21357949780152679795e2) * z +
            4.59432382970980127987e3) *
               z +
           2.26290000613890934246e4) *
              z +
          4.92673942608635921086e4);
}

template <class A>
auto polevl_P(const A& a) {
  return ((((((((2.46196981473530512524e-10 * a + 5.64189564831068821977e-1) * a +
                7.46321056442269912687e0) *
                   a +
               4.86371970985681366614e1) *
                  a +
              1.96520832956077098242e2) *
                 a +
             5.26445194995477358631e2) *
                a +
            9.34528527171957607540e2) *
               a +
           1.02755188689515710272e3) *
              a +
          5.57535335369399327526e2);
}

template <class A>
auto polevl_Q(const A& a) {
  return ((((((((a + 1.32281951154744992508e1) * a + 8.67072140885989742329e1) * a +
               3.54937778887819891062e2) *
                  a +
              9.75708501743205489753e2) *
                 a +
             1.82390916687909736289e3) *
                a +
            3.18902091162924276395e3) *
               a +
           6.06183819614581953315e3) *
              a +
          2.78788439273628983568e3);
}

}  // namespace

double erf_scalar(double x) {
  double a = std::abs(x);
  if (a < 1.0) {
    double z = x * x;
    return x * polevl_T(z) / polevl_U(z);
  }
  if (a >= 6.0) return x > 0 ? 1.0 : -1.0;
  double erfc = std::exp(-a * a) * polevl_P(a) / polevl_Q(a);
  double r = 1.0 - erfc;
  return x > 0 ? r : -r;
}

void erf_inplace(Eigen::ArrayXXd& x) {
  Eigen::ArrayXXd a = x.abs();
  Eigen::ArrayXXd z = x.square();
  Eigen::ArrayXXd small = x * polevl_T(z) / polevl_U(z);
  Eigen::ArrayXXd tail = 1.0 - (-z).exp() * polevl_P(a) / polevl_Q(a);
  tail = (a < 6.0).select(tail, 1.0);
  tail = (x > 0.0).select(tail, -tail);
  x = (a < 1.0).select(small, tail);
}

void gelu_inplace(Eigen::ArrayXXd& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  Eigen::ArrayXXd t = x * inv_sqrt2;
  erf_inplace(t);
  x = 0.5 * x * (1.0 + t);
}

Eigen::ArrayXXd gelu_grad(const Eigen::ArrayXXd& pre) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  Eigen::ArrayXXd t = pre * inv_sqrt2;
  erf_inplace(t);
  Eigen::ArrayXXd cdf = 0.5 * (1.0 + t);
  Eigen::ArrayXXd pdf = inv_sqrt2pi * (-0.5 * pre.square()).exp();
  return cdf + pre * pdf;
}

double pearson_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double degenerate_eps) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  if (x.size() < 2) throw ShapeError("pearson: need at least 2 observations");
  Eigen::VectorXd cx = x.array() - x.mean();
  Eigen::VectorXd cy = y.array() - y.mean();
  double nx = cx.norm(), ny = cy.norm();
  double n = static_cast<double>(x.size());
  if (nx / std::sqrt(n) < degenerate_eps || ny / std::sqrt(n) < degenerate_eps) return 0.0;
  return cx.dot(cy) / (nx * ny);
}

double sample_std(const Eigen::VectorXd& x) {
  if (x.size() < 2) throw InsufficientDataError("sample_std: need at least 2 observations");
  double mean = x.mean();
  double ss = (x.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // trim to the shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char t[40];
    std::snprintf(t, sizeof(t), "%.*g", prec, v);
    if (std::strtod(t, nullptr) == v) return t;
  }
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace fascl
