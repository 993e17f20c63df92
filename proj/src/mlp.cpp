// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <stdexcept>
#include <string>

#include "shortft/models.hpp"
#include "shortft/rng.hpp"

namespace shortft {

std::vector<ParamRef> MlpParams::refs() {
  std::vector<ParamRef> out;
  const auto layer_count = static_cast<std::uint32_t>(layers.size());
  for (std::uint32_t j = 0; j < layer_count; ++j) {
    out.push_back({ParamId{role, 2 * j}, "l" + std::to_string(j) + ".weight", &layers[j].weight});
    out.push_back({ParamId{role, 2 * j + 1}, "l" + std::to_string(j) + ".bias", &layers[j].bias});
  }
  if (class_embedding.rank() == 2) {
    out.push_back({ParamId{role, 2 * layer_count}, "class_embedding", &class_embedding});
  }
  return out;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const Linear& l : layers) n += l.weight.size() + l.bias.size();
  if (class_embedding.rank() == 2) n += class_embedding.size();
  return n;
}

Tensor sinusoidal_time_table(int horizon, std::size_t dim) {
  if (dim % 2 != 0) throw std::invalid_argument("sinusoidal_time_table: dim must be even");
  const std::size_t half = dim / 2;
  Tensor table({static_cast<std::size_t>(horizon) + 1, dim});
  for (int t = 0; t <= horizon; ++t) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
      const double arg = t * freq;
      table.at(static_cast<std::size_t>(t), i) = std::sin(arg);
      table.at(static_cast<std::size_t>(t), half + i) = std::cos(arg);
    }
  }
  return table;
}

MlpParams init_mlp(ParamRole role, std::size_t input_dim, std::size_t hidden, std::size_t depth,
                   std::size_t output_dim, std::size_t class_rows, std::size_t class_dim,
                   std::uint64_t seed) {
  MlpParams net;
  net.role = role;
  for (std::size_t j = 0; j <= depth; ++j) {
    const std::size_t in = j == 0 ? input_dim : hidden;
    const std::size_t out = j == depth ? output_dim : hidden;
    CounterRng rng(seed, Phase::kDenoiserInit, static_cast<std::uint64_t>(role), j);
    Linear layer;
    // Small output layer: the model starts close to its skip path.
    const double gain = j == depth ? 0.1 : 1.0;
    layer.weight = rng.normal_tensor({in, out}, gain / std::sqrt(static_cast<double>(in)));
    layer.bias = Tensor({out}, 0.0);
    net.layers.push_back(std::move(layer));
  }
  if (class_rows > 0) {
    CounterRng rng(seed, Phase::kDenoiserInit, static_cast<std::uint64_t>(role), 1000);
    net.class_embedding = rng.normal_tensor({class_rows, class_dim});
  }
  return net;
}

DenoiserParams init_denoiser(const MlpConfig& config, int horizon, std::uint64_t seed) {
  DenoiserParams p;
  p.config = config;
  p.horizon = horizon;
  p.net = init_mlp(ParamRole::kDenoiser, config.data_dim + config.time_dim + config.class_dim,
                   config.hidden, config.depth, config.data_dim, config.num_classes + 1,
                   config.class_dim, seed);
  p.time_table = sinusoidal_time_table(horizon, config.time_dim);
  return p;
}

DenoiserParams init_denoiser(const MlpConfig& config, const NoiseSchedule& schedule,
                             std::uint64_t seed) {
  DenoiserParams p = init_denoiser(config, schedule.T, seed);
  p.skip_gain.resize(schedule.alpha_bar.size());
  for (std::size_t t = 0; t < p.skip_gain.size(); ++t) {
    p.skip_gain[t] = std::sqrt(1.0 - schedule.alpha_bar[t]);
  }
  return p;
}

Var mlp_forward(Tape& tape, const MlpParams& net, Var input, const Binding& binding) {
  const std::size_t stack_size = binding.stack ? binding.stack->size() : 0;
  if (!binding.active.empty()) {
    if (!binding.stack) throw std::invalid_argument("mlp_forward: adapters active without a stack");
    validate_adapter_set(binding.active, stack_size);
  }
  Var h = input;
  const std::size_t layer_count = net.layers.size();
  for (std::size_t j = 0; j < layer_count; ++j) {
    const auto ju = static_cast<std::uint32_t>(j);
    Var w = tape.param(ParamId{net.role, 2 * ju}, net.layers[j].weight, binding.base_trainable);
    Var b = tape.param(ParamId{net.role, 2 * ju + 1}, net.layers[j].bias, binding.base_trainable);
    Var out = affine(h, w, b);
    for (int idx : binding.active) {
      const auto i = static_cast<std::size_t>(idx - 1);
      const LoraAdapter& adapter = binding.stack->adapters[i];
      const bool train = binding.stack->trainable.at(i);
      Var down = tape.param(LoraStack::down_id(i, j), adapter.down.at(j), train);
      Var up = tape.param(LoraStack::up_id(i, j), adapter.up.at(j), train);
      Var delta = matmul(matmul(h, down), up);
      if (adapter.scale != 1.0) delta = scale(delta, adapter.scale);
      out = out + delta;
    }
    h = j + 1 < layer_count ? silu(out) : out;
  }
  return h;
}

Tensor time_features(const Tensor& table, std::span<const int> timesteps) {
  const std::size_t dim = table.cols();
  Tensor out({timesteps.size(), dim});
  for (std::size_t r = 0; r < timesteps.size(); ++r) {
    const int t = timesteps[r];
    if (t < 0 || static_cast<std::size_t>(t) >= table.rows()) {
      throw std::out_of_range("time_features: timestep " + std::to_string(t) + " outside table");
    }
    for (std::size_t c = 0; c < dim; ++c) out.at(r, c) = table.at(static_cast<std::size_t>(t), c);
  }
  return out;
}

Tensor class_one_hot(std::span<const int> classes, std::size_t num_classes) {
  Tensor out({classes.size(), num_classes + 1}, 0.0);
  for (std::size_t r = 0; r < classes.size(); ++r) {
    const int c = classes[r];
    if (c == kNullClass) {
      out.at(r, num_classes) = 1.0;
    } else if (c >= 0 && static_cast<std::size_t>(c) < num_classes) {
      out.at(r, static_cast<std::size_t>(c)) = 1.0;
    } else {
      throw std::invalid_argument("class id " + std::to_string(c) + " out of range");
    }
  }
  return out;
}

}  // namespace shortft
