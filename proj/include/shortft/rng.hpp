// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "shortft/tensor.hpp"

namespace shortft {

/// Pipeline phases that own disjoint random streams.
enum class Phase : std::uint64_t {
  kData = 1,
  kDenoiserInit,
  kBaseTrain,
  kCriticInit,
  kCriticTrain,
  kStudentInit,
  kDistillPool,
  kDistillTrain,
  kDistillProbes,
  kLoraInit,
  kFinetune,
  kEval,
  kSampling,
  kGradcheck,
  kTest,
};

/// Counter-based generator: the stream is a pure function of
/// (seed, phase, step, lane), so any fan-out over steps or lanes reproduces the
/// same draws regardless of evaluation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Phase phase, std::uint64_t step = 0, std::uint64_t lane = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Tensor normal_tensor(const Shape& shape, double stddev = 1.0);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace shortft
