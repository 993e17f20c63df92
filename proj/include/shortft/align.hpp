// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortft/diffusion.hpp"
#include "shortft/models.hpp"
#include "shortft/optim.hpp"
#include "shortft/rewards.hpp"
#include "shortft/shortcut.hpp"

namespace shortft {

enum class Strategy { kVanilla, kDraftK, kStopGrad, kShortFT };

/// Accepts `vanilla`, `draft-k` (or `draft_k`), `stopgrad`, `shortft`.
Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy strategy);

/// One edge of a denoising pass.
struct ChainNode {
  enum class Kind { kTeacher, kJump };
  Kind kind = Kind::kTeacher;
  int t_from = 0;
  int t_to = 0;
  AdapterSet adapters;  // teacher steps only
  bool grad_enabled = false;
  /// Teacher step whose noise prediction sees stop_gradient(x_t): the state
  /// gradient flows through the carry term only, parameters still get one.
  bool stop_eps_input = false;

  bool operator==(const ChainNode&) const = default;
};

struct ChainSpec {
  std::vector<ChainNode> nodes;

  std::size_t grad_enabled_count() const;
  std::size_t teacher_count() const;
  std::size_t jump_count() const;
  /// Checks contiguity, the terminal t = 0, and suffix-closed gradients.
  void validate() const;
  std::string describe() const;
};

struct ChainOptions {
  int K = 1;
  AdapterLayout layout = AdapterLayout::kTimestepAware;
  InferenceActivation inference_rule = InferenceActivation::kSegment;
};

/// Chain for one strategy. `stage` is 1-based and only used by shortft.
ChainSpec build_chain(const SegmentPlan& plan, Strategy strategy, int stage,
                      const ChainOptions& options = {});

/// The original inference chain (every DDIM step, inference activation,
/// no gradient).
ChainSpec inference_chain(const SegmentPlan& plan, const ChainOptions& options = {});

/// Frozen models a chain runs against.
struct ChainModels {
  const DenoiserParams* teacher = nullptr;
  const LoraStack* stack = nullptr;
  const StudentParams* student = nullptr;
  const NoiseSchedule* schedule = nullptr;
  const SegmentPlan* plan = nullptr;
  double guidance_scale = 2.0;
};

Var run_chain(Tape& tape, const ChainModels& models, const ChainSpec& chain, Var x_T,
              std::span<const int> conditions);

struct Objective {
  double J = 0.0;
  GradMap grads;  // dJ/dθ for the trainable adapters
  std::size_t tape_nodes = 0;
};

/// J = batch-mean reward of the chain output, with gradients for every
/// trainable adapter of the stack. Frozen adapters get no entry.
Objective reward_objective(const ChainModels& models, const ChainSpec& chain,
                           const RewardSpec& reward, const RewardContext& ctx, const Tensor& x_T,
                           std::span<const int> conditions);

struct StageState {
  int stage = 1;
  AdapterSet trainable;
  AdapterSet frozen;
  std::size_t steps = 0;
};

/// Stage i trains adapters {i..k} and freezes {1..i-1}.
std::vector<StageState> progressive_schedule(int k, std::size_t steps_per_stage);

struct StrategyConfig {
  Strategy strategy = Strategy::kShortFT;
  ChainOptions chain;
  int stages = 4;                    // progressive stages for shortft
  bool progressive = true;           // false trains one stage only
  int single_stage = 0;              // stage used when !progressive (0 → last)
  std::size_t steps_per_stage = 100; // baselines run stages × steps_per_stage
  double budget_seconds = 0.0;       // > 0 replaces step counts by wall-clock
  std::size_t batch = 32;
  AdamWConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 0.1};
  double explosion_factor = 1e3;    // clip above factor × median grad norm of the phase
  std::size_t median_warmup = 5;
  std::uint64_t seed = 0;
  std::string label;  // strategy column in metrics; defaults to the strategy name
};

struct MetricsRow {
  std::size_t step = 0;
  int stage = 1;
  std::string strategy;
  double J = 0.0;
  double grad_norm = 0.0;
  std::size_t nodes_grad_enabled = 0;
  double wallclock_ms = 0.0;
  std::size_t explosion_events = 0;
};

struct FinetuneResult {
  LoraStack stack;
  std::vector<MetricsRow> rows;
  std::size_t explosion_events = 0;
  double seconds = 0.0;
};

using MetricsSink = std::function<void(const MetricsRow&)>;

/// Draws of x_T and conditions for one optimizer step.
void draw_batch(std::uint64_t seed, Phase phase, std::size_t step, std::size_t batch,
                std::size_t dim, std::size_t num_classes, Tensor& x_T, std::vector<int>& cond);

/// Adapter count the strategy trains: k for timestep-aware shortft, else 1.
std::size_t adapter_count(const StrategyConfig& config, int k);

/// Reward fine-tuning of `stack` (sized by adapter_count). `models.stack` is
/// ignored; the stack being trained is bound internally.
FinetuneResult finetune(const ChainModels& models, LoraStack stack, const RewardSpec& reward,
                        const RewardContext& ctx, const StrategyConfig& config,
                        std::size_t num_classes, const MetricsSink& sink = {});

}  // namespace shortft
