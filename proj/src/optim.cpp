// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/optim.hpp"

#include <algorithm>
#include <cmath>

namespace shortft {

void AdamW::step(std::span<const ParamRef> params, const GradMap& grads) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (const ParamRef& p : params) {
    auto it = grads.find(p.id);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (g.shape() != p.value->shape()) {
      throw ShapeError("AdamW: gradient " + shape_to_string(g.shape()) + " for parameter " +
                       p.name + " of shape " + shape_to_string(p.value->shape()));
    }
    auto [slot, fresh] = state_.try_emplace(p.id);
    if (fresh) {
      slot->second.m = Tensor::zeros_like(g);
      slot->second.v = Tensor::zeros_like(g);
    }
    Tensor& m = slot->second.m;
    Tensor& v = slot->second.v;
    Tensor& w = *p.value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      w[i] -= config_.lr * (update + config_.weight_decay * w[i]);
    }
  }
}

double cosine_lr(double base, std::size_t step, std::size_t total, double floor_fraction) {
  if (total == 0) return base;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  const double cosine = 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
  return base * (floor_fraction + (1.0 - floor_fraction) * cosine);
}

double grad_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [id, g] : grads) s += squared_norm(g);
  return std::sqrt(s);
}

void scale_grads(GradMap& grads, double factor) {
  for (auto& [id, g] : grads) {
    for (double& v : g.data()) v *= factor;
  }
}

}  // namespace shortft
