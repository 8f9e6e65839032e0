#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include "lipgail/common.hpp"

namespace lipgail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seeded RNG with hand-pinned uniform/normal math so draw sequences are a
// function of our code alone, not of libstdc++ distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : mix_(splitmix64(seed)), gen_(splitmix64(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Fisher-Yates
  void shuffle(std::vector<int>& idx) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(idx[i], idx[j]);
    }
  }

  // uniform on the L2 sphere of given radius
  std::vector<double> sphere(int dim, double radius) {
    std::vector<double> z(dim);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (auto& x : z) {
        x = normal();
        n2 += x * x;
      }
    } while (n2 == 0.0);
    double s = radius / std::sqrt(n2);
    for (auto& x : z) x *= s;
    return z;
  }

  // uniform inside the L2 ball
  std::vector<double> ball(int dim, double radius) {
    auto z = sphere(dim, radius);
    double u = std::pow(uniform(), 1.0 / dim);
    for (auto& x : z) x *= u;
    return z;
  }

  // uniform on the surface of the Linf ball: pick a face, pin that coordinate
  std::vector<double> linf_surface(int dim, double radius) {
    std::vector<double> z(dim);
    for (auto& x : z) x = uniform(-radius, radius);
    int face = uniform_int(dim);
    z[face] = uniform() < 0.5 ? -radius : radius;
    return z;
  }

  // independent child stream; the mix is order-free so callers can derive
  // per-episode streams that do not depend on execution order
  Rng fork(uint64_t tag) const { return Rng(mix_ ^ splitmix64(tag)); }
  Rng fork(std::string_view tag) const { return fork(fnv1a64(tag)); }

 private:
  uint64_t mix_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lipgail
