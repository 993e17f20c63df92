// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace shortft {

using ValueFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

/// Largest |analytic − central difference| / (|central difference| + 1e-8)
/// over the checked coordinates (all of them when `coords` is empty).
double finite_diff_check(const ValueFn& value, const GradFn& grad,
                         std::span<const double> point, double epsilon,
                         std::span<const std::size_t> coords = {});

}  // namespace shortft
