// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>

#include "shortft/autodiff.hpp"
#include "shortft/models.hpp"

namespace shortft {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

/// AdamW with decoupled weight decay. Parameters missing from the gradient map
/// are left untouched.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(std::span<const ParamRef> params, const GradMap& grads);
  std::size_t steps() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  AdamWConfig config_;
  std::size_t steps_ = 0;
  std::map<ParamId, Moments> state_;
};

/// Cosine decay from `base` at step 0 to `floor_fraction`·base at `total`.
double cosine_lr(double base, std::size_t step, std::size_t total, double floor_fraction);

double grad_norm(const GradMap& grads);
void scale_grads(GradMap& grads, double factor);

}  // namespace shortft
