// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "shortft/tensor.hpp"

namespace shortft {

double finite_diff_check(const ValueFn& value, const GradFn& grad,
                         std::span<const double> point, double epsilon,
                         std::span<const std::size_t> coords) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");
  const std::vector<double> analytic = grad(point);
  if (analytic.size() != point.size()) {
    throw std::invalid_argument("finite_diff_check: gradient has " +
                                std::to_string(analytic.size()) + " entries for " +
                                std::to_string(point.size()) + " coordinates");
  }
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(point.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }

  std::vector<double> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    if (i >= probe.size()) throw std::out_of_range("finite_diff_check: coordinate out of range");
    const double x = probe[i];
    probe[i] = x + epsilon;
    const double up = value(probe);
    probe[i] = x - epsilon;
    const double down = value(probe);
    probe[i] = x;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
      throw NonFiniteError("finite_diff_check: function returned a non-finite value");
    }
    const double central = (up - down) / (2.0 * epsilon);
    worst = std::max(worst, std::abs(analytic[i] - central) / (std::abs(central) + 1e-8));
  }
  return worst;
}

}  // namespace shortft
