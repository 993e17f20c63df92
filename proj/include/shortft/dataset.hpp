// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shortft/tensor.hpp"

namespace shortft {

enum class TaskKind { kPoints2d, kBars16 };

TaskKind parse_task(std::string_view name);
std::string_view task_name(TaskKind task);

/// Labeled toy samples, one per row. Image tasks store H×W row-major pixels.
struct Dataset {
  TaskKind task = TaskKind::kPoints2d;
  Tensor x;
  std::vector<int> labels;
  std::size_t height = 0;  // 0 for non-image tasks
  std::size_t width = 0;
  std::size_t num_classes = 2;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return x.cols(); }
  /// Rows [begin, end) as a new dataset.
  Dataset slice(std::size_t begin, std::size_t end) const;
};

/// Raw (unnormalized) generator parameters.
struct TaskShape {
  std::size_t dim;
  std::size_t height;
  std::size_t width;
  std::size_t num_classes;
};
TaskShape task_shape(TaskKind task);

/// Scalar affine normalization shared by every coordinate, so pixel symmetry
/// survives it. Constants come from a fixed reference draw per task.
struct Normalization {
  double mean = 0.0;
  double stddev = 1.0;
};
Normalization task_normalization(TaskKind task);

/// Seeded, normalized samples with balanced-in-expectation labels.
Dataset generate_dataset(TaskKind task, std::size_t n, std::uint64_t seed);

/// Unnormalized draws; `noise` scales the pixel noise of image tasks.
Dataset generate_raw(TaskKind task, std::size_t n, std::uint64_t seed, double noise);

/// Unnormalized bars image from a slot mask (bit s lights slot s).
Tensor bars_pattern(int label, unsigned mask);

}  // namespace shortft
