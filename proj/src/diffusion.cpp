// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "shortft/rng.hpp"

namespace shortft {

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown schedule kind '" + std::string(name) + "'");
}

std::string_view schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

int NoiseSchedule::successor(int t) const {
  auto it = std::find(step_list.begin(), step_list.end(), t);
  if (it == step_list.end()) {
    throw std::out_of_range("successor: timestep " + std::to_string(t) + " is not on the chain");
  }
  ++it;
  return it == step_list.end() ? 0 : *it;
}

bool NoiseSchedule::on_chain(int t) const {
  return t == 0 || std::find(step_list.begin(), step_list.end(), t) != step_list.end();
}

NoiseSchedule build_schedule(int T, ScheduleKind kind, int step_count) {
  if (step_count < 2) throw std::invalid_argument("build_schedule: step_count must be >= 2");
  if (step_count > T) {
    throw std::invalid_argument("build_schedule: step_count " + std::to_string(step_count) +
                                " exceeds T = " + std::to_string(T));
  }
  NoiseSchedule s;
  s.T = T;
  s.kind = kind;
  const auto n = static_cast<std::size_t>(T) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);

  if (kind == ScheduleKind::kLinear) {
    // Standard DDPM endpoints for T = 1000, rescaled for other horizons.
    const double scale = 1000.0 / T;
    const double start = std::min(scale * 1e-4, 0.999);
    const double end = std::min(scale * 2e-2, 0.999);
    for (int t = 1; t <= T; ++t) {
      const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
      s.beta[static_cast<std::size_t>(t)] = start + (end - start) * frac;
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](int t) {
      const double v = std::cos((static_cast<double>(t) / T + offset) / (1.0 + offset) *
                                std::numbers::pi / 2.0);
      return v * v;
    };
    for (int t = 1; t <= T; ++t) {
      s.beta[static_cast<std::size_t>(t)] = std::min(1.0 - f(t) / f(t - 1), 0.999);
    }
  }
  for (std::size_t t = 1; t < n; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }

  const int stride = T / step_count;
  for (int i = step_count - 1; i >= 0; --i) s.step_list.push_back(1 + stride * i);
  return s;
}

StepCoefficients ddim_coefficients(const NoiseSchedule& schedule, int t_from, int t_to,
                                   double eta) {
  if (t_from < 0 || t_to < 0 || t_from > schedule.T || t_to > schedule.T) {
    throw std::out_of_range("ddim_coefficients: timesteps (" + std::to_string(t_from) + ", " +
                            std::to_string(t_to) + ") outside [0, " +
                            std::to_string(schedule.T) + "]");
  }
  if (t_from < t_to) {
    throw std::out_of_range("ddim_coefficients: t_from " + std::to_string(t_from) +
                            " must not be below t_to " + std::to_string(t_to));
  }
  if (eta < 0.0 || eta > 1.0) throw std::out_of_range("ddim_coefficients: eta outside [0, 1]");

  const double ab_from = schedule.alpha_bar[static_cast<std::size_t>(t_from)];
  const double ab_to = schedule.alpha_bar[static_cast<std::size_t>(t_to)];
  double sigma = 0.0;
  if (eta > 0.0 && t_from != t_to) {
    sigma = eta * std::sqrt((1.0 - ab_to) / (1.0 - ab_from)) * std::sqrt(1.0 - ab_from / ab_to);
  }
  StepCoefficients c;
  c.t_from = t_from;
  c.t_to = t_to;
  c.a = std::sqrt(ab_to / ab_from);
  c.b = std::sqrt(std::max(0.0, 1.0 - ab_to - sigma * sigma)) - c.a * std::sqrt(1.0 - ab_from);
  c.c = sigma;
  return c;
}

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& noise,
                       const NoiseSchedule& schedule) {
  if (x0.shape() != noise.shape()) {
    throw ShapeError("forward_diffuse: shape mismatch " + shape_to_string(x0.shape()) + " vs " +
                     shape_to_string(noise.shape()));
  }
  if (t < 0 || t > schedule.T) throw std::out_of_range("forward_diffuse: t outside [0, T]");
  const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double keep = std::sqrt(ab);
  const double mix = std::sqrt(1.0 - ab);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * x0[i] + mix * noise[i];
  return out;
}

Var ddim_step(Var x_t, Var eps_pred, const StepCoefficients& coeffs, const Tensor* noise) {
  Var out = coeffs.a * x_t + coeffs.b * eps_pred;
  if (coeffs.c != 0.0) {
    if (noise == nullptr) throw std::invalid_argument("ddim_step: stochastic step needs noise");
    out = out + coeffs.c * x_t.tape().constant_ref(*noise);
  }
  return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& eps_pred, const StepCoefficients& coeffs,
                 const Tensor* noise) {
  if (x_t.shape() != eps_pred.shape()) {
    throw ShapeError("ddim_step: shape mismatch " + shape_to_string(x_t.shape()) + " vs " +
                     shape_to_string(eps_pred.shape()));
  }
  if (!x_t.all_finite() || !eps_pred.all_finite()) {
    throw NonFiniteError("ddim_step: non-finite input");
  }
  Tensor out = coeffs.a * x_t + coeffs.b * eps_pred;
  if (coeffs.c != 0.0) {
    if (noise == nullptr) throw std::invalid_argument("ddim_step: stochastic step needs noise");
    out = out + coeffs.c * *noise;
  }
  return out;
}

Tensor sample(const EpsModel& eps_model, const Tensor& x_T, const NoiseSchedule& schedule,
              double eta, std::uint64_t seed) {
  Tensor x = x_T;
  const auto& steps = schedule.step_list;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const int t_from = steps[i];
    const int t_to = i + 1 < steps.size() ? steps[i + 1] : 0;
    const StepCoefficients coeffs = ddim_coefficients(schedule, t_from, t_to, eta);
    Tensor noise;
    if (coeffs.c != 0.0) {
      CounterRng rng(seed, Phase::kSampling, i);
      noise = rng.normal_tensor(x.shape());
    }
    x = ddim_step(x, eps_model(x, t_from), coeffs, coeffs.c != 0.0 ? &noise : nullptr);
  }
  return x;
}

}  // namespace shortft
