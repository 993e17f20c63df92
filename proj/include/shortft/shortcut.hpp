// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shortft/dataset.hpp"
#include "shortft/diffusion.hpp"
#include "shortft/models.hpp"
#include "shortft/optim.hpp"
#include "shortft/rng.hpp"

namespace shortft {

/// Few-step student. It sees (x, t_from, t_to, class) and predicts the state
/// at t_to as a·x + b·(sqrt(1 − ᾱ_from)·x + net(...)) with (a, b) the DDIM
/// jump coefficients: a DDIM jump with a learned noise estimate around the
/// unit-Gaussian one. A zero-length jump is the identity.
struct StudentParams {
  MlpConfig config;
  int horizon = 1000;
  MlpParams net;
  Tensor time_table;
  double guidance_scale = 2.0;  // the teacher guidance baked in

  std::size_t parameter_count() const { return net.parameter_count(); }
};

StudentParams init_student(const MlpConfig& config, int horizon, double guidance_scale,
                           std::uint64_t seed);

/// Batched student forward with per-row timesteps. Student weights are bound
/// frozen; gradient flows to `x` only.
Var student_forward(Tape& tape, const StudentParams& student, const NoiseSchedule& schedule,
                    Var x, std::span<const int> t_from, std::span<const int> t_to,
                    std::span<const int> classes, bool trainable = false);

/// A jump exists from an on-chain t_from to the next LoRA timestep below it
/// (0 below the last one). Every plan span has this form.
bool is_valid_jump(const SegmentPlan& plan, int t_from, int t_to);

/// One frozen student jump; throws std::invalid_argument when the plan has no
/// such shortcut.
Var shortcut_jump(Tape& tape, const StudentParams& student, const NoiseSchedule& schedule,
                  const SegmentPlan& plan, Var x_t, int t_from, int t_to,
                  std::span<const int> conditions);

/// Shortcut(t): composed student jumps t → … → 0 with no teacher steps.
Tensor shortcut_to_zero(const StudentParams& student, const NoiseSchedule& schedule,
                        const SegmentPlan& plan, const Tensor& x_t, int t,
                        std::span<const int> conditions);
/// Timesteps visited by shortcut_to_zero, starting at t and ending with 0.
std::vector<int> shortcut_path(const SegmentPlan& plan, int t);

/// DDIM(t): one-step x̂_0 = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t from the guided teacher.
Tensor predict_x0_one_step(const DenoiserParams& teacher, const Tensor& x_t, int t,
                           std::span<const int> conditions, const NoiseSchedule& schedule,
                           double guidance_scale);

/// Guided deterministic DDIM teacher sub-chain from t_from down to t_to over
/// the listed steps (the final hop may land on 0). No adapters.
Tensor teacher_subchain(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                        const Tensor& x, int t_from, int t_to, std::span<const int> conditions,
                        double guidance_scale);

struct DistillConfig {
  std::size_t steps = 6000;
  std::size_t batch = 256;
  std::size_t pool_size = 40000;
  double identity_fraction = 0.05;
  std::size_t probes_per_step = 16;  // held-out probes per DDIM timestep
  std::size_t epoch_steps = 500;     // optimizer steps per reported epoch
  AdamWConfig optimizer{1e-3, 0.9, 0.999, 1e-8, 0.0};
  double guidance_scale = 2.0;
  double teacher_loss_threshold = 1.0;  // warn above this final base loss
  std::uint64_t seed = 0;
};

struct DistillEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::vector<double> heldout_mse;  // one per segment
};

struct DistillReport {
  std::vector<DistillEpoch> epochs;
  std::size_t probe_count = 0;
  double data_variance = 1.0;
  std::vector<std::string> warnings;

  /// Held-out endpoint MSE per segment after the last epoch.
  const std::vector<double>& final_heldout() const { return epochs.back().heldout_mse; }
};

/// Held-out probe set: x_t on the teacher trajectory at every DDIM timestep
/// and its teacher sub-chain endpoint at next_lora_below(t).
struct ProbeSet {
  Tensor x_t;
  Tensor target;
  std::vector<int> t_from;
  std::vector<int> t_to;
  std::vector<int> classes;
  std::vector<int> segment;  // landing segment, 1-based
};

ProbeSet make_probes(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                     const SegmentPlan& plan, const Dataset& data, std::size_t per_step,
                     double guidance_scale, std::uint64_t seed, Phase phase);

/// Mean squared endpoint error per landing segment.
std::vector<double> probe_mse(const StudentParams& student, const NoiseSchedule& schedule,
                              const SegmentPlan& plan, const ProbeSet& probes);

struct DistillResult {
  StudentParams student;
  DistillReport report;
};

/// Sub-chain endpoint regression against the guided teacher. `teacher_loss`
/// is the final base-training loss, checked against the config threshold.
DistillResult distill_student(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                              const SegmentPlan& plan, const Dataset& data,
                              const MlpConfig& student_config, const DistillConfig& config,
                              double teacher_loss);

}  // namespace shortft
