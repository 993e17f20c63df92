// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace shortft {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, Phase phase, std::uint64_t step, std::uint64_t lane) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ static_cast<std::uint64_t>(phase));
  k = splitmix64(k ^ step);
  key_ = splitmix64(k ^ lane);
}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ ^ splitmix64(counter_++));
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  // Box-Muller, cosine branch only; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % n;
}

Tensor CounterRng::normal_tensor(const Shape& shape, double stddev) {
  Tensor t(shape);
  for (double& v : t.data()) v = stddev * normal();
  return t;
}

}  // namespace shortft
