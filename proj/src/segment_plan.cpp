// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <stdexcept>
#include <string>

#include "shortft/models.hpp"

namespace shortft {

InferenceActivation parse_inference_activation(std::string_view name) {
  if (name == "segment") return InferenceActivation::kSegment;
  if (name == "assigned-step-only") return InferenceActivation::kAssignedStepOnly;
  throw std::invalid_argument("unknown inference_activation '" + std::string(name) + "'");
}

std::string_view inference_activation_name(InferenceActivation rule) {
  return rule == InferenceActivation::kSegment ? "segment" : "assigned-step-only";
}

AdapterLayout parse_adapter_layout(std::string_view name) {
  if (name == "timestep-aware") return AdapterLayout::kTimestepAware;
  if (name == "shared") return AdapterLayout::kShared;
  throw std::invalid_argument("unknown adapter layout '" + std::string(name) + "'");
}

std::string_view adapter_layout_name(AdapterLayout layout) {
  return layout == AdapterLayout::kTimestepAware ? "timestep-aware" : "shared";
}

int SegmentPlan::segment_of(int t) const {
  if (t < 0 || t > T) throw std::out_of_range("segment_of: t = " + std::to_string(t));
  for (int j = 1; j <= k; ++j) {
    if (t > boundaries[static_cast<std::size_t>(j - 1)]) return j;
  }
  return k;
}

bool SegmentPlan::is_span(int from, int to) const {
  return std::find(shortcut_spans.begin(), shortcut_spans.end(), ShortcutSpan{from, to}) !=
         shortcut_spans.end();
}

int SegmentPlan::next_lora_below(int t) const {
  for (int lt : lora_timesteps) {
    if (lt < t) return lt;
  }
  return 0;
}

bool SegmentPlan::is_lora_timestep(int t) const {
  return std::find(lora_timesteps.begin(), lora_timesteps.end(), t) != lora_timesteps.end();
}

SegmentPlan build_segment_plan(const NoiseSchedule& schedule, int k) {
  if (k < 2) throw std::invalid_argument("build_segment_plan: k must be >= 2");
  if (schedule.step_list.empty()) throw std::invalid_argument("build_segment_plan: empty step list");
  SegmentPlan plan;
  plan.T = schedule.T;
  plan.k = k;
  plan.delta_t = schedule.T / k;
  plan.step_list = schedule.step_list;
  for (int j = 1; j <= k; ++j) plan.boundaries.push_back(schedule.T - j * plan.delta_t);
  // The last segment absorbs the remainder when k does not divide T.
  plan.boundaries.back() = 0;

  int upper = schedule.T;
  for (int j = 1; j <= k; ++j) {
    const int lower = plan.boundaries[static_cast<std::size_t>(j - 1)];
    int best = -1;
    for (int t : schedule.step_list) {
      if (t > lower && t <= upper && (best < 0 || t < best)) best = t;
    }
    if (best < 0) {
      throw std::invalid_argument("build_segment_plan: segment " + std::to_string(j) + " = (" +
                                  std::to_string(lower) + ", " + std::to_string(upper) +
                                  "] contains no DDIM timestep");
    }
    plan.lora_timesteps.push_back(best);
    upper = lower;
  }
  for (int j = 0; j + 1 < k; ++j) {
    const int from = schedule.successor(plan.lora_timesteps[static_cast<std::size_t>(j)]);
    plan.shortcut_spans.push_back({from, plan.lora_timesteps[static_cast<std::size_t>(j + 1)]});
  }
  return plan;
}

namespace {

AdapterSet prefix(int n) {
  AdapterSet s;
  for (int i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

}  // namespace

AdapterSet active_adapters(const SegmentPlan& plan, int t, ActivationMode mode,
                           InferenceActivation rule) {
  if (t != 0 && std::find(plan.step_list.begin(), plan.step_list.end(), t) == plan.step_list.end()) {
    throw std::out_of_range("active_adapters: t = " + std::to_string(t) + " is not on the chain");
  }
  const int seg = plan.segment_of(t);
  if (mode == ActivationMode::kInference && rule == InferenceActivation::kSegment) {
    return prefix(seg);
  }
  if (t == 0) return {};
  if (seg == 1) return {1};
  if (t == plan.lora_timesteps[static_cast<std::size_t>(seg - 1)]) return prefix(seg);
  return {};
}

AdapterSet inference_adapters(const SegmentPlan& plan, std::size_t stack_size, AdapterLayout layout,
                              InferenceActivation rule, int t) {
  if (stack_size == 0) return {};
  if (layout == AdapterLayout::kShared) return {1};
  if (stack_size < static_cast<std::size_t>(plan.k)) {
    throw std::invalid_argument("inference_adapters: timestep-aware layout needs " +
                                std::to_string(plan.k) + " adapters");
  }
  return active_adapters(plan, t, ActivationMode::kInference, rule);
}

}  // namespace shortft
