// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "shortft/rng.hpp"

namespace shortft {

namespace {

constexpr std::size_t kBarsSide = 16;
constexpr std::size_t kBarsSlots = 8;
constexpr double kBarsNoise = 0.05;
constexpr double kPointsOffset = 1.5;
constexpr double kPointsStd = 0.3;
constexpr std::uint64_t kReferenceSeed = 0x5eed;
constexpr std::size_t kReferenceSize = 20000;

}  // namespace

TaskKind parse_task(std::string_view name) {
  if (name == "points2d") return TaskKind::kPoints2d;
  if (name == "bars16") return TaskKind::kBars16;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

std::string_view task_name(TaskKind task) {
  return task == TaskKind::kPoints2d ? "points2d" : "bars16";
}

TaskShape task_shape(TaskKind task) {
  if (task == TaskKind::kPoints2d) return {2, 0, 0, 2};
  return {kBarsSide * kBarsSide, kBarsSide, kBarsSide, 2};
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  Dataset d = *this;
  d.x = x.slice_rows(begin, end);
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  labels.begin() + static_cast<std::ptrdiff_t>(end));
  return d;
}

Tensor bars_pattern(int label, unsigned mask) {
  Tensor img({kBarsSide * kBarsSide}, 0.0);
  for (std::size_t s = 0; s < kBarsSlots; ++s) {
    if (!((mask >> s) & 1U)) continue;
    for (std::size_t k = 2 * s; k < 2 * s + 2; ++k) {
      for (std::size_t o = 0; o < kBarsSide; ++o) {
        // Class 0 lights rows (horizontal bars), class 1 lights columns.
        const std::size_t r = label == 0 ? k : o;
        const std::size_t c = label == 0 ? o : k;
        img[r * kBarsSide + c] = 1.0;
      }
    }
  }
  return img;
}

Dataset generate_raw(TaskKind task, std::size_t n, std::uint64_t seed, double noise) {
  const TaskShape shape = task_shape(task);
  Dataset d;
  d.task = task;
  d.height = shape.height;
  d.width = shape.width;
  d.num_classes = shape.num_classes;
  d.x = Tensor({n, shape.dim});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, Phase::kData, i);
    const int label = static_cast<int>(rng.below(2));
    d.labels[i] = label;
    if (task == TaskKind::kPoints2d) {
      d.x.at(i, 0) = (label == 0 ? -kPointsOffset : kPointsOffset) + kPointsStd * rng.normal();
      d.x.at(i, 1) = kPointsStd * rng.normal();
    } else {
      unsigned mask = 0;
      while (mask == 0) mask = static_cast<unsigned>(rng.below(1U << kBarsSlots));
      const Tensor img = bars_pattern(label, mask);
      for (std::size_t p = 0; p < shape.dim; ++p) d.x.at(i, p) = img[p] + noise * rng.normal();
    }
  }
  return d;
}

Normalization task_normalization(TaskKind task) {
  const Dataset ref = generate_raw(task, kReferenceSize, kReferenceSeed,
                                   task == TaskKind::kBars16 ? kBarsNoise : 0.0);
  double sum = 0.0;
  for (double v : ref.x.data()) sum += v;
  const double count = static_cast<double>(ref.x.size());
  const double mean = sum / count;
  double var = 0.0;
  for (double v : ref.x.data()) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / count)};
}

Dataset generate_dataset(TaskKind task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
  static const Normalization points = task_normalization(TaskKind::kPoints2d);
  static const Normalization bars = task_normalization(TaskKind::kBars16);
  const Normalization& norm = task == TaskKind::kPoints2d ? points : bars;
  Dataset d = generate_raw(task, n, seed, kBarsNoise);
  for (double& v : d.x.data()) v = (v - norm.mean) / norm.stddev;
  return d;
}

}  // namespace shortft
