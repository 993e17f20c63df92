// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shortft/autodiff.hpp"
#include "shortft/dataset.hpp"
#include "shortft/models.hpp"
#include "shortft/optim.hpp"

namespace shortft {

enum class RewardKind { kSymmetry, kCritic, kTv, kCombined };

std::string_view reward_kind_name(RewardKind kind);

/// Higher is always better: penalties are negated before they get here.
struct RewardSpec {
  RewardKind kind = RewardKind::kSymmetry;
  struct Term {
    RewardKind kind;
    double weight;
  };
  std::vector<Term> terms;  // combined only

  /// Preset names `symmetry`, `critic`, `tv`, `combined:<kind>=<w>,...`, and
  /// `combined:reference` for {critic: 10, symmetry: 2, tv: 0.05}.
  static RewardSpec parse(std::string_view text);
  std::string to_string() const;
};

/// Classifier over data space producing class logits.
struct CriticParams {
  MlpParams net;
  std::size_t num_classes = 2;
};

struct CriticConfig {
  std::size_t hidden = 64;
  std::size_t depth = 2;
  std::size_t steps = 1500;
  std::size_t batch = 128;
  std::size_t train_size = 8000;
  double holdout_fraction = 0.2;
  AdamWConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 0.0};
  double min_accuracy = 0.80;  // below this the proxy is unusable
  /// Cross-entropy targets (1 − s)·onehot + s/C. Keeps the log-prob reward
  /// away from saturation on separable toy data.
  double label_smoothing = 0.1;
  std::uint64_t seed = 0;
};

class CriticQualityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CriticParams init_critic(std::size_t data_dim, std::size_t num_classes, const CriticConfig& config);

/// Per-row class logits.
Var critic_logits(Tape& tape, const CriticParams& critic, Var x);

struct CriticReport {
  double heldout_accuracy = 0.0;
  double final_loss = 0.0;
};

/// Trains on the leading rows and scores the trailing holdout fraction.
/// Throws CriticQualityError below `min_accuracy`.
CriticParams train_critic(const Dataset& data, const CriticConfig& config,
                          CriticReport* report = nullptr);
double critic_accuracy(const CriticParams& critic, const Dataset& data);

/// Rewards below return the batch mean as a scalar Var.

/// −mean((x − hflip(x))²) over H×W images, H = W = √dim.
Var reward_symmetry(Var x);
/// Mean log-probability of each row's class; null classes are rejected.
Var reward_critic(Tape& tape, const CriticParams& critic, Var x, std::span<const int> conditions);
/// −(mean smooth|∂x/∂h| + mean smooth|∂x/∂w|) over H×W images.
Var reward_tv(Var x, double eps = 1e-6);
/// Σ w_i·R_i.
Var reward_combined(std::span<const double> weights, std::span<const Var> components);

/// Everything a reward needs besides (x, condition).
struct RewardContext {
  const CriticParams* critic = nullptr;
};

Var evaluate_reward(Tape& tape, const RewardSpec& spec, const RewardContext& ctx, Var x,
                    std::span<const int> conditions);
/// Per-row rewards without taping.
std::vector<double> reward_per_sample(const RewardSpec& spec, const RewardContext& ctx,
                                      const Tensor& x, std::span<const int> conditions);

/// Side of the square image packed in a row of `dim` values.
std::size_t image_side(std::size_t dim);

}  // namespace shortft
