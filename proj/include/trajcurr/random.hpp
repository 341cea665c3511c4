#pragma once

#include <cstdint>
#include <random>

namespace trajcurr {

// splitmix64; used to turn (seed, tag...) tuples into well-mixed engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic per-purpose random stream. Streams derived from the same
/// seed but different tags are independent for practical purposes, which is
/// what lets particle updates run in parallel without sharing an engine.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  RngStream(std::uint64_t seed, std::uint64_t a) : engine_(mix64(mix64(seed) ^ a)) {}

  RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
      : engine_(mix64(mix64(mix64(seed) ^ a) ^ b)) {}

  RngStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c)
      : engine_(mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c)) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

  /// Index into [0, n) with the given weights (need not be normalized).
  int categorical(const double* weights, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace trajcurr
