#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace pearrl {

/// Independent random streams used by one run. Every stream is keyed by
/// (seed, purpose, index), so step k of a run never depends on how many
/// draws earlier steps consumed.
enum class StreamPurpose : std::uint32_t {
  demographics = 1,
  bandit = 2,
  backend = 3,
  static_pick = 4,
  wizard = 5,
};

/// mt19937_64 with hand-rolled transforms. The std:: distributions are
/// implementation-defined, which would make logs differ across toolchains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform01();

  // Unbiased integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  double normal(double mean, double stddev);

  // Index i with probability weights[i] / sum(weights).
  std::size_t weighted_index(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace pearrl
