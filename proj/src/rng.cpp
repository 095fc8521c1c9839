#include "pearrl/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pearrl {

namespace {

std::uint32_t low32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t high32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

std::mt19937_64 seeded_engine(std::initializer_list<std::uint32_t> words) {
  std::seed_seq seq(words);
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seeded_engine({low32(seed), high32(seed)})) {}

Rng Rng::stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
  Rng rng(0);
  rng.engine_ = seeded_engine({low32(seed), high32(seed), static_cast<std::uint32_t>(purpose),
                               low32(index), high32(index)});
  return rng;
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("uniform_index: empty range");
  }
  const auto range = static_cast<std::uint64_t>(n);
  // Reject the final partial block so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = engine_();
  while (draw >= limit) {
    draw = engine_();
  }
  return static_cast<std::size_t>(draw % range);
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller, one variate per call. u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

std::size_t Rng::weighted_index(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    total += w;
  }
  if (weights.empty() || !(total > 0.0)) {
    throw std::invalid_argument("weighted_index: weights must have a positive sum");
  }
  const double target = uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) {
      return i;
    }
  }
  // Rounding can leave target == total; fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) {
      return i;
    }
  }
  return weights.size() - 1;
}

}  // namespace pearrl
