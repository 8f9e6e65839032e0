#pragma once

#include <charconv>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipgail {

// error taxonomy, mapped to CLI exit codes by tools/main.cpp
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// raised when a training loss or state goes non-finite
struct NanAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

enum class Norm { L2, Linf };

// dense row-major matrix of doubles, the plain (non-autodiff) carrier type
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
    require(static_cast<size_t>(r) * c == v.size(), "Mat: data size mismatch");
  }

  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
  std::span<double> row_span(int i) { return {row(i), static_cast<size_t>(cols)}; }
  std::span<const double> row_span(int i) const { return {row(i), static_cast<size_t>(cols)}; }
  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return v.size(); }
};

// shortest round-trip decimal form; used for all CSV/text payloads so that
// re-running with the same seed yields byte-identical files
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t x) {
  static const char* d = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = d[x & 0xf];
    x >>= 4;
  }
  return out;
}

int env_thread_count();  // LIPGAIL_THREADS, default 1

}  // namespace lipgail
