#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace lrml {

/// Seeded generator used everywhere randomness enters. Streams derived from
/// (seed, stream) are independent, which lets splits and epochs be pure
/// functions of their inputs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform and the output independent of
    // the standard library's distribution implementation.
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x < threshold);
    return x % n;
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  template <typename T>
  void shuffle(std::span<T> xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::swap(xs[i - 1], xs[uniform_index(i)]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lrml
