// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "shortft/autodiff.hpp"
#include "shortft/tensor.hpp"

namespace shortft {

enum class ScheduleKind { kLinear, kCosine };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view schedule_kind_name(ScheduleKind kind);

/// Forward-process constants. Tables are indexed by timestep 0..T with
/// beta[0] = 0 and alpha_bar[0] = 1.
struct NoiseSchedule {
  int T = 0;
  ScheduleKind kind = ScheduleKind::kLinear;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  /// DDIM timesteps, strictly descending, ending at 1 under the uniform stride.
  std::vector<int> step_list;

  /// Next chain timestep below `t` (0 after the last listed step).
  int successor(int t) const;
  bool on_chain(int t) const;
};

NoiseSchedule build_schedule(int T, ScheduleKind kind, int step_count);

/// x_to = a·x_from + b·eps + c·noise.
struct StepCoefficients {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  int t_from = 0;
  int t_to = 0;
};

/// DDIM update between two timesteps in affine form. `t_from == t_to` yields
/// the identity step (a = 1, b = c = 0).
StepCoefficients ddim_coefficients(const NoiseSchedule& schedule, int t_from, int t_to,
                                   double eta);

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& noise,
                       const NoiseSchedule& schedule);

/// Taped step; gradient reaches both x_t and eps_pred unless a caller cuts one.
/// `noise` may be null when coeffs.c == 0.
Var ddim_step(Var x_t, Var eps_pred, const StepCoefficients& coeffs, const Tensor* noise);
Tensor ddim_step(const Tensor& x_t, const Tensor& eps_pred, const StepCoefficients& coeffs,
                 const Tensor* noise);

/// Noise prediction at timestep t for a batch of states; conditioning,
/// guidance and adapters are bound by the caller.
using EpsModel = std::function<Tensor(const Tensor& x, int t)>;

/// Full DDIM chain from x_T through every listed step and a final step to 0.
/// Deterministic for eta = 0; eta > 0 draws per-step noise keyed by `seed`.
Tensor sample(const EpsModel& eps_model, const Tensor& x_T, const NoiseSchedule& schedule,
              double eta, std::uint64_t seed);

}  // namespace shortft
