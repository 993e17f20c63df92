// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <vector>

#include "shortft/models.hpp"

namespace shortft {

Var denoiser_forward(Tape& tape, const DenoiserParams& params, const Binding& binding, Var x,
                     std::span<const int> timesteps, std::span<const int> classes) {
  const std::size_t n = x.value().rows();
  if (timesteps.size() != n || classes.size() != n) {
    throw ShapeError("denoiser_forward: " + std::to_string(n) + " rows but " +
                     std::to_string(timesteps.size()) + " timesteps and " +
                     std::to_string(classes.size()) + " classes");
  }
  if (x.value().cols() != params.config.data_dim) {
    throw ShapeError("denoiser_forward: input " + shape_to_string(x.shape()) +
                     " does not match data dim " + std::to_string(params.config.data_dim));
  }
  Var temb = tape.constant(time_features(params.time_table, timesteps));
  Var onehot = tape.constant(class_one_hot(classes, params.config.num_classes));
  const auto emb_index = static_cast<std::uint32_t>(2 * params.net.layers.size());
  Var table = tape.param(ParamId{params.net.role, emb_index}, params.net.class_embedding,
                         binding.base_trainable);
  Var input = concat_cols(concat_cols(x, temb), matmul(onehot, table));
  Var out = mlp_forward(tape, params.net, input, binding);
  if (params.skip_gain.empty()) return out;
  Tensor gain({n, params.config.data_dim});
  for (std::size_t r = 0; r < n; ++r) {
    const double g = params.skip_gain.at(static_cast<std::size_t>(timesteps[r]));
    for (std::size_t q = 0; q < params.config.data_dim; ++q) gain.at(r, q) = g;
  }
  return out + x * tape.constant(std::move(gain));
}

Var denoise_eps(Tape& tape, const DenoiserParams& params, const Binding& binding, Var x_t, int t,
                std::span<const int> conditions, double guidance_scale) {
  const std::size_t n = x_t.value().rows();
  if (t < 0 || t > params.horizon) throw std::out_of_range("denoise_eps: t outside [0, T]");
  const std::vector<int> ts(n, t);
  const std::vector<int> nulls(n, kNullClass);
  if (guidance_scale == 0.0) return denoiser_forward(tape, params, binding, x_t, ts, nulls);
  if (guidance_scale == 1.0) return denoiser_forward(tape, params, binding, x_t, ts, conditions);

  std::vector<int> classes(conditions.begin(), conditions.end());
  classes.insert(classes.end(), nulls.begin(), nulls.end());
  const std::vector<int> ts2(2 * n, t);
  Var both = denoiser_forward(tape, params, binding, concat_rows(x_t, x_t), ts2, classes);
  Var cond = slice_rows(both, 0, n);
  Var uncond = slice_rows(both, n, 2 * n);
  return (1.0 - guidance_scale) * uncond + guidance_scale * cond;
}

Tensor sample(const DenoiserParams& params, const LoraStack* stack, const SegmentPlan& plan,
              AdapterLayout layout, InferenceActivation rule, std::span<const int> conditions,
              const Tensor& x_T, const NoiseSchedule& schedule, double guidance_scale, double eta,
              std::uint64_t seed) {
  const std::size_t stack_size = stack ? stack->size() : 0;
  EpsModel eps_model = [&](const Tensor& x, int t) {
    Tape tape;
    NoGradGuard guard(tape);
    Binding binding{false, stack, inference_adapters(plan, stack_size, layout, rule, t)};
    return denoise_eps(tape, params, binding, tape.constant_ref(x), t, conditions, guidance_scale)
        .value();
  };
  return sample(eps_model, x_T, schedule, eta, seed);
}

}  // namespace shortft
