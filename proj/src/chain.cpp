// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "shortft/align.hpp"

namespace shortft {

Strategy parse_strategy(std::string_view name) {
  if (name == "vanilla") return Strategy::kVanilla;
  if (name == "draft-k" || name == "draft_k") return Strategy::kDraftK;
  if (name == "stopgrad") return Strategy::kStopGrad;
  if (name == "shortft") return Strategy::kShortFT;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVanilla: return "vanilla";
    case Strategy::kDraftK: return "draft-k";
    case Strategy::kStopGrad: return "stopgrad";
    case Strategy::kShortFT: return "shortft";
  }
  return "?";
}

std::size_t ChainSpec::grad_enabled_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const ChainNode& n) { return n.grad_enabled; }));
}

std::size_t ChainSpec::teacher_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const ChainNode& n) {
    return n.kind == ChainNode::Kind::kTeacher;
  }));
}

std::size_t ChainSpec::jump_count() const { return nodes.size() - teacher_count(); }

void ChainSpec::validate() const {
  if (nodes.empty()) throw std::invalid_argument("chain: no nodes");
  bool grad_seen = false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const ChainNode& n = nodes[i];
    if (n.t_from <= n.t_to) {
      throw std::invalid_argument("chain: node " + std::to_string(i) + " does not descend");
    }
    if (i > 0 && nodes[i - 1].t_to != n.t_from) {
      throw std::invalid_argument("chain: gap between node " + std::to_string(i - 1) + " and " +
                                  std::to_string(i));
    }
    if (grad_seen && !n.grad_enabled) {
      throw std::invalid_argument("chain: gradient disabled after an enabled node");
    }
    grad_seen = grad_seen || n.grad_enabled;
  }
  if (nodes.back().t_to != 0) throw std::invalid_argument("chain: does not end at t = 0");
}

std::string ChainSpec::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const ChainNode& n = nodes[i];
    if (i) os << ' ';
    os << n.t_from << (n.kind == ChainNode::Kind::kJump ? "=>" : "->") << n.t_to;
    if (n.kind == ChainNode::Kind::kTeacher) os << adapter_set_to_string(n.adapters);
    if (n.grad_enabled) os << (n.stop_eps_input ? "*s" : "*");
  }
  return os.str();
}

namespace {

ChainNode teacher(int t_from, int t_to, AdapterSet adapters) {
  ChainNode n;
  n.kind = ChainNode::Kind::kTeacher;
  n.t_from = t_from;
  n.t_to = t_to;
  n.adapters = std::move(adapters);
  return n;
}

int successor(const SegmentPlan& plan, int t) {
  auto it = std::find(plan.step_list.begin(), plan.step_list.end(), t);
  if (it == plan.step_list.end()) {
    throw std::out_of_range("chain: timestep " + std::to_string(t) + " is not on the chain");
  }
  ++it;
  return it == plan.step_list.end() ? 0 : *it;
}

AdapterSet prefix_set(int n) {
  AdapterSet s;
  for (int i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

AdapterSet step_adapters(const SegmentPlan& plan, const ChainOptions& options, int t) {
  return inference_adapters(plan, static_cast<std::size_t>(plan.k), options.layout,
                            options.inference_rule, t);
}

AdapterSet train_adapters(const SegmentPlan& plan, const ChainOptions& options, int t) {
  if (options.layout == AdapterLayout::kShared) return {1};
  return active_adapters(plan, t, ActivationMode::kTrainChain);
}

void enable_suffix(ChainSpec& chain, std::size_t first) {
  for (std::size_t i = first; i < chain.nodes.size(); ++i) chain.nodes[i].grad_enabled = true;
}

}  // namespace

ChainSpec inference_chain(const SegmentPlan& plan, const ChainOptions& options) {
  ChainSpec chain;
  for (int t : plan.step_list) {
    chain.nodes.push_back(teacher(t, successor(plan, t), step_adapters(plan, options, t)));
  }
  return chain;
}

ChainSpec build_chain(const SegmentPlan& plan, Strategy strategy, int stage,
                      const ChainOptions& options) {
  if (options.K < 1) throw std::invalid_argument("build_chain: K must be >= 1");
  ChainSpec chain;
  const auto K = static_cast<std::size_t>(options.K);
  if (strategy != Strategy::kShortFT) {
    // Baselines fine-tune one adapter shared by every timestep.
    for (int t : plan.step_list) chain.nodes.push_back(teacher(t, successor(plan, t), {1}));
    switch (strategy) {
      case Strategy::kVanilla:
        enable_suffix(chain, 0);
        break;
      case Strategy::kDraftK:
        enable_suffix(chain, chain.nodes.size() - std::min(K, chain.nodes.size()));
        break;
      case Strategy::kStopGrad:
        enable_suffix(chain, 0);
        for (ChainNode& n : chain.nodes) n.stop_eps_input = true;
        break;
      case Strategy::kShortFT: break;
    }
    chain.validate();
    return chain;
  }

  if (stage < 1 || stage > plan.k) {
    throw std::invalid_argument("build_chain: stage " + std::to_string(stage) + " outside [1, " +
                                std::to_string(plan.k) + "]");
  }
  const auto lora = [&](int j) { return plan.lora_timesteps[static_cast<std::size_t>(j - 1)]; };
  // Retained original chain down to and including the stage's LoRA timestep.
  for (int t : plan.step_list) {
    if (t < lora(stage)) break;
    chain.nodes.push_back(teacher(t, successor(plan, t), train_adapters(plan, options, t)));
  }
  enable_suffix(chain, chain.nodes.size() - std::min(K, chain.nodes.size()));
  int at = chain.nodes.back().t_to;
  for (int j = stage + 1; j <= plan.k; ++j) {
    if (at > lora(j)) {
      ChainNode jump;
      jump.kind = ChainNode::Kind::kJump;
      jump.t_from = at;
      jump.t_to = lora(j);
      jump.grad_enabled = true;
      chain.nodes.push_back(jump);
    }
    AdapterSet set = options.layout == AdapterLayout::kShared ? AdapterSet{1} : prefix_set(j);
    ChainNode step = teacher(lora(j), successor(plan, lora(j)), std::move(set));
    step.grad_enabled = true;
    chain.nodes.push_back(step);
    at = step.t_to;
  }
  chain.validate();
  return chain;
}

Var run_chain(Tape& tape, const ChainModels& models, const ChainSpec& chain, Var x_T,
              std::span<const int> conditions) {
  if (!models.teacher || !models.schedule) {
    throw std::invalid_argument("run_chain: teacher and schedule are required");
  }
  Var x = x_T;
  for (const ChainNode& n : chain.nodes) {
    std::optional<NoGradGuard> frozen;
    if (!n.grad_enabled) frozen.emplace(tape);
    if (n.kind == ChainNode::Kind::kJump) {
      if (!models.student || !models.plan) {
        throw std::invalid_argument("run_chain: shortcut jump without a student and plan");
      }
      x = shortcut_jump(tape, *models.student, *models.schedule, *models.plan, x, n.t_from,
                        n.t_to, conditions);
    } else {
      const Binding binding{false, models.stack,
                            models.stack ? n.adapters : AdapterSet{}};
      Var in = n.stop_eps_input ? stop_gradient(x) : x;
      Var eps = denoise_eps(tape, *models.teacher, binding, in, n.t_from, conditions,
                            models.guidance_scale);
      x = ddim_step(x, eps, ddim_coefficients(*models.schedule, n.t_from, n.t_to, 0.0), nullptr);
    }
  }
  return x;
}

}  // namespace shortft
