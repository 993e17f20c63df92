// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "shortft/align.hpp"
#include "shortft/rng.hpp"

namespace shortft {

Objective reward_objective(const ChainModels& models, const ChainSpec& chain,
                           const RewardSpec& reward, const RewardContext& ctx, const Tensor& x_T,
                           std::span<const int> conditions) {
  Tape tape;
  Var x0 = run_chain(tape, models, chain, tape.constant_ref(x_T), conditions);
  Var J = evaluate_reward(tape, reward, ctx, x0, conditions);
  Objective out;
  out.J = J.value().item();
  if (!std::isfinite(out.J)) throw NonFiniteError("gradient explosion: non-finite objective");
  if (models.stack) {
    const std::vector<GradRequest> requests = models.stack->trainable_requests();
    out.grads = tape.backward(J, requests);
  }
  out.tape_nodes = tape.size();
  return out;
}

std::vector<StageState> progressive_schedule(int k, std::size_t steps_per_stage) {
  if (k < 1) throw std::invalid_argument("progressive_schedule: k must be >= 1");
  if (steps_per_stage < 1) {
    throw std::invalid_argument("progressive_schedule: steps_per_stage must be >= 1");
  }
  std::vector<StageState> out;
  for (int i = 1; i <= k; ++i) {
    StageState s;
    s.stage = i;
    s.steps = steps_per_stage;
    for (int a = 1; a <= k; ++a) (a >= i ? s.trainable : s.frozen).push_back(a);
    out.push_back(std::move(s));
  }
  return out;
}

void draw_batch(std::uint64_t seed, Phase phase, std::size_t step, std::size_t batch,
                std::size_t dim, std::size_t num_classes, Tensor& x_T, std::vector<int>& cond) {
  CounterRng noise(seed, phase, step, 0);
  x_T = noise.normal_tensor({batch, dim});
  CounterRng labels(seed, phase, step, 1);
  cond.resize(batch);
  for (int& c : cond) c = static_cast<int>(labels.below(num_classes));
}

std::size_t adapter_count(const StrategyConfig& config, int k) {
  return config.strategy == Strategy::kShortFT &&
                 config.chain.layout == AdapterLayout::kTimestepAware
             ? static_cast<std::size_t>(k)
             : 1;
}

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

struct StagePlan {
  int stage = 1;
  std::vector<bool> trainable;
  std::size_t steps = 0;
};

}  // namespace

FinetuneResult finetune(const ChainModels& models, LoraStack stack, const RewardSpec& reward,
                        const RewardContext& ctx, const StrategyConfig& config,
                        std::size_t num_classes, const MetricsSink& sink) {
  if (!models.plan || !models.schedule || !models.teacher) {
    throw std::invalid_argument("finetune: teacher, schedule and plan are required");
  }
  const SegmentPlan& plan = *models.plan;
  const std::size_t expected = adapter_count(config, plan.k);
  if (stack.size() != expected) {
    throw std::invalid_argument("finetune: strategy trains " + std::to_string(expected) +
                                " adapters, stack holds " + std::to_string(stack.size()));
  }
  if (config.strategy == Strategy::kShortFT && !models.student) {
    throw std::invalid_argument("finetune: shortft needs a distilled student");
  }
  const bool shortft = config.strategy == Strategy::kShortFT;
  const bool aware = stack.size() > 1;

  std::vector<StagePlan> phases;
  if (shortft && config.progressive) {
    if (config.stages != plan.k) {
      throw std::invalid_argument("finetune: progressive stages must equal the plan's k");
    }
    for (const StageState& s : progressive_schedule(plan.k, std::max<std::size_t>(1, config.steps_per_stage))) {
      StagePlan p;
      p.stage = s.stage;
      p.steps = config.steps_per_stage;
      p.trainable.assign(stack.size(), !aware);
      if (aware) {
        for (int a : s.trainable) p.trainable[static_cast<std::size_t>(a - 1)] = true;
      }
      phases.push_back(std::move(p));
    }
  } else {
    StagePlan p;
    p.stage = shortft ? (config.single_stage > 0 ? config.single_stage : plan.k) : 1;
    p.steps = config.steps_per_stage * static_cast<std::size_t>(std::max(1, config.stages));
    p.trainable.assign(stack.size(), true);
    phases.push_back(std::move(p));
  }

  const std::string label =
      config.label.empty() ? std::string(strategy_name(config.strategy)) : config.label;
  const std::size_t dim = models.teacher->config.data_dim;
  AdamW opt(config.optimizer);
  FinetuneResult result;
  std::vector<double> norms;
  std::size_t step = 0;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const double phase_budget =
      config.budget_seconds > 0 ? config.budget_seconds / static_cast<double>(phases.size()) : 0.0;

  for (const StagePlan& phase : phases) {
    stack.trainable = phase.trainable;
    ChainModels bound = models;
    bound.stack = &stack;
    const ChainSpec chain = build_chain(plan, config.strategy, phase.stage, config.chain);
    const auto phase_start = Clock::now();
    // Each phase trains a different adapter set on a different chain, so the
    // gradient scale is re-learned per phase.
    norms.clear();
    for (std::size_t i = 0;; ++i) {
      if (phase_budget > 0) {
        const double used = std::chrono::duration<double>(Clock::now() - phase_start).count();
        if (used >= phase_budget) break;
      } else if (i >= phase.steps) {
        break;
      }
      ++step;
      Tensor x_T;
      std::vector<int> cond;
      draw_batch(config.seed, Phase::kFinetune, step, config.batch, dim, num_classes, x_T, cond);
      MetricsRow row;
      row.step = step;
      row.stage = phase.stage;
      row.strategy = label;
      row.nodes_grad_enabled = chain.grad_enabled_count();
      try {
        Objective obj = reward_objective(bound, chain, reward, ctx, x_T, cond);
        double norm = grad_norm(obj.grads);
        row.J = obj.J;
        row.grad_norm = norm;
        if (norms.size() >= config.median_warmup) {
          const double limit = config.explosion_factor * median(norms);
          if (norm > limit && limit > 0) {
            scale_grads(obj.grads, limit / norm);
            ++result.explosion_events;
          }
        }
        norms.push_back(norm);
        // Ascent on J is descent on −J.
        scale_grads(obj.grads, -1.0);
        const std::vector<ParamRef> refs = stack.refs();
        opt.step(refs, obj.grads);
      } catch (const NonFiniteError&) {
        row.J = std::numeric_limits<double>::quiet_NaN();
        row.grad_norm = std::numeric_limits<double>::quiet_NaN();
        ++result.explosion_events;
      }
      row.explosion_events = result.explosion_events;
      row.wallclock_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      if (sink) sink(row);
      result.rows.push_back(std::move(row));
    }
  }
  stack.trainable.assign(stack.size(), false);
  result.stack = std::move(stack);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

}  // namespace shortft
