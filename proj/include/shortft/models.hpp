// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shortft/autodiff.hpp"
#include "shortft/diffusion.hpp"
#include "shortft/tensor.hpp"

namespace shortft {

inline constexpr int kNullClass = -1;

struct ParamRef {
  ParamId id;
  std::string name;
  Tensor* value = nullptr;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

/// Plain SiLU MLP with an optional class-embedding table (null class in the
/// last row). Used by the denoiser, the shortcut student and the critic.
struct MlpParams {
  ParamRole role = ParamRole::kDenoiser;
  std::vector<Linear> layers;
  Tensor class_embedding;  // [num_classes + 1, class_dim], empty for the critic

  std::vector<ParamRef> refs();
  std::size_t parameter_count() const;
};

struct MlpConfig {
  std::size_t data_dim = 2;
  std::size_t time_dim = 32;
  std::size_t class_dim = 16;
  std::size_t hidden = 128;
  std::size_t depth = 4;  // hidden layers; depth + 1 linear layers
  std::size_t num_classes = 2;
};

struct DenoiserParams {
  MlpConfig config;
  int horizon = 1000;
  MlpParams net;
  Tensor time_table;  // [horizon + 1, time_dim], sinusoidal, not trained
  /// Optional fixed skip: eps = skip_gain[t]·x_t + net(...). With
  /// skip_gain[t] = sqrt(1 − alpha_bar_t) the untrained model is the exact
  /// noise predictor for unit-Gaussian data. Empty means no skip.
  std::vector<double> skip_gain;

  std::size_t parameter_count() const { return net.parameter_count(); }
};

Tensor sinusoidal_time_table(int horizon, std::size_t dim);

/// `extra_time_inputs` widens the input by that many time embeddings (the
/// student also sees its target timestep).
MlpParams init_mlp(ParamRole role, std::size_t input_dim, std::size_t hidden, std::size_t depth,
                   std::size_t output_dim, std::size_t class_rows, std::size_t class_dim,
                   std::uint64_t seed);
DenoiserParams init_denoiser(const MlpConfig& config, int horizon, std::uint64_t seed);
/// Same network with the Gaussian skip of `schedule` attached.
DenoiserParams init_denoiser(const MlpConfig& config, const NoiseSchedule& schedule,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Low-rank adapters

/// One adapter: per linear layer j, delta_j = scale · down_j · up_j with
/// down_j [in_j, r] and up_j [r, out_j] (row-vector form of B·A).
struct LoraAdapter {
  std::vector<Tensor> down;
  std::vector<Tensor> up;
  std::size_t rank = 4;
  double scale = 1.0;
};

/// Adapter i (1-based) may only be active together with 1..i-1.
struct LoraStack {
  std::vector<LoraAdapter> adapters;
  std::vector<bool> trainable;

  std::size_t size() const noexcept { return adapters.size(); }
  static ParamId down_id(std::size_t adapter, std::size_t layer);
  static ParamId up_id(std::size_t adapter, std::size_t layer);
  std::vector<ParamRef> refs();
  /// Gradient requests for every parameter of the trainable adapters.
  std::vector<GradRequest> trainable_requests() const;
  std::size_t parameter_count() const;
};

/// 1-based adapter indices, ascending. Valid sets are {} or {1..n}.
using AdapterSet = std::vector<int>;

void validate_adapter_set(const AdapterSet& set, std::size_t stack_size);
std::string adapter_set_to_string(const AdapterSet& set);

/// A initialized N(0, 0.01²), B zero, so a fresh stack is an exact no-op.
LoraStack init_lora_stack(const MlpParams& base, std::size_t count, std::size_t rank,
                          double scale, std::uint64_t seed);

struct LoraDelta {
  const Tensor* down = nullptr;
  const Tensor* up = nullptr;
  double scale = 1.0;
};

/// x·W + Σ scale_i·(x·down_i)·up_i.
Tensor lora_forward(const Tensor& weight, std::span<const LoraDelta> deltas, const Tensor& x);
/// W + Σ scale_i·down_i·up_i.
Tensor merge_lora(const Tensor& weight, std::span<const LoraDelta> deltas);

// ---------------------------------------------------------------------------
// Forward passes

/// How the base and adapter parameters bind to a tape for one forward.
struct Binding {
  bool base_trainable = false;
  const LoraStack* stack = nullptr;
  AdapterSet active;
};

/// Unguided forward over raw network inputs (already concatenated).
Var mlp_forward(Tape& tape, const MlpParams& net, Var input, const Binding& binding);

Tensor time_features(const Tensor& table, std::span<const int> timesteps);
Tensor class_one_hot(std::span<const int> classes, std::size_t num_classes);

/// Unguided noise prediction with per-row timesteps and classes.
Var denoiser_forward(Tape& tape, const DenoiserParams& params, const Binding& binding, Var x,
                     std::span<const int> timesteps, std::span<const int> classes);

/// Classifier-free guided prediction (1 − w)·eps_u + w·eps_c at a shared
/// timestep. w = 0 and w = 1 return the unconditional and conditional branch
/// exactly.
Var denoise_eps(Tape& tape, const DenoiserParams& params, const Binding& binding, Var x_t, int t,
                std::span<const int> conditions, double guidance_scale);

// ---------------------------------------------------------------------------
// Segment plan

enum class ActivationMode { kTrainChain, kInference };
/// Which adapters run at inference on timesteps that carry no assigned adapter.
enum class InferenceActivation { kSegment, kAssignedStepOnly };
/// Timestep-aware stack versus one adapter shared by every timestep.
enum class AdapterLayout { kTimestepAware, kShared };

InferenceActivation parse_inference_activation(std::string_view name);
std::string_view inference_activation_name(InferenceActivation rule);
AdapterLayout parse_adapter_layout(std::string_view name);
std::string_view adapter_layout_name(AdapterLayout layout);

struct ShortcutSpan {
  int from = 0;
  int to = 0;
  bool operator==(const ShortcutSpan&) const = default;
};

struct SegmentPlan {
  int T = 0;
  int k = 0;
  int delta_t = 0;
  std::vector<int> boundaries;      // m_1..m_k, m_j = T − j·delta_t
  std::vector<int> lora_timesteps;  // one per segment, strictly descending
  std::vector<ShortcutSpan> shortcut_spans;  // segment j → j+1, j = 1..k−1
  std::vector<int> step_list;

  /// 1-based segment containing t; t = 0 maps to the last segment.
  int segment_of(int t) const;
  bool is_span(int from, int to) const;
  /// Largest LoRA timestep strictly below t, or 0.
  int next_lora_below(int t) const;
  bool is_lora_timestep(int t) const;
};

SegmentPlan build_segment_plan(const NoiseSchedule& schedule, int k);

AdapterSet active_adapters(const SegmentPlan& plan, int t, ActivationMode mode,
                           InferenceActivation rule = InferenceActivation::kSegment);

/// Adapters used at timestep t on the original inference chain.
AdapterSet inference_adapters(const SegmentPlan& plan, std::size_t stack_size, AdapterLayout layout,
                              InferenceActivation rule, int t);

/// Full original chain with inference-time activation, taping disabled.
Tensor sample(const DenoiserParams& params, const LoraStack* stack, const SegmentPlan& plan,
              AdapterLayout layout, InferenceActivation rule, std::span<const int> conditions,
              const Tensor& x_T, const NoiseSchedule& schedule, double guidance_scale, double eta,
              std::uint64_t seed);

}  // namespace shortft
