#pragma once

#include <cmath>
#include <cstdint>

namespace nmc {

// Counter-based 64-bit generator (SplitMix64 stream). Independent streams are
// derived by hashing a (seed, replica, purpose) key, so replicas can run in
// parallel without sharing generator state.
class Rng {
 public:
  explicit Rng(uint64_t state) : state_(state) {}

  static uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static Rng keyed(uint64_t seed, uint64_t replica, uint64_t purpose) {
    return Rng(mix64(seed ^ mix64(replica ^ mix64(purpose))));
  }

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  bool coin() { return (next() >> 63) != 0; }

  // Uniform integer in [0, n), n > 0. Lemire's multiply-shift with rejection.
  uint64_t below(uint64_t n) {
    for (;;) {
      uint64_t x = next();
      __uint128_t m = __uint128_t(x) * n;
      uint64_t lo = uint64_t(m);
      if (lo >= n || lo >= uint64_t(-n) % n) return uint64_t(m >> 64);
    }
  }

  // Standard normal via Box-Muller (second value cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang; boost trick for alpha < 1.
  double gamma(double alpha) {
    if (alpha < 1.0) {
      double u;
      do {
        u = uniform();
      } while (u <= 0.0);
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Stream purposes for keyed generators.
enum StreamPurpose : uint64_t {
  kStreamChain = 1,
  kStreamGenerator = 2,
  kStreamPolicyInit = 3,
  kStreamShuffle = 4,
  kStreamBootstrap = 5,
};

}  // namespace nmc
