// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>
#include <stdexcept>
#include <string>

#include "shortft/models.hpp"
#include "shortft/rng.hpp"

namespace shortft {

namespace {
constexpr std::uint32_t kAdapterStride = 1024;
}

ParamId LoraStack::down_id(std::size_t adapter, std::size_t layer) {
  return ParamId{ParamRole::kLora,
                 static_cast<std::uint32_t>(adapter * kAdapterStride + 2 * layer)};
}

ParamId LoraStack::up_id(std::size_t adapter, std::size_t layer) {
  return ParamId{ParamRole::kLora,
                 static_cast<std::uint32_t>(adapter * kAdapterStride + 2 * layer + 1)};
}

std::vector<ParamRef> LoraStack::refs() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    for (std::size_t j = 0; j < adapters[i].down.size(); ++j) {
      const std::string prefix = "lora" + std::to_string(i + 1) + ".l" + std::to_string(j);
      out.push_back({down_id(i, j), prefix + ".down", &adapters[i].down[j]});
      out.push_back({up_id(i, j), prefix + ".up", &adapters[i].up[j]});
    }
  }
  return out;
}

std::vector<GradRequest> LoraStack::trainable_requests() const {
  std::vector<GradRequest> out;
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    if (!trainable.at(i)) continue;
    for (std::size_t j = 0; j < adapters[i].down.size(); ++j) {
      out.push_back({down_id(i, j), adapters[i].down[j].shape()});
      out.push_back({up_id(i, j), adapters[i].up[j].shape()});
    }
  }
  return out;
}

std::size_t LoraStack::parameter_count() const {
  std::size_t n = 0;
  for (const LoraAdapter& a : adapters) {
    for (std::size_t j = 0; j < a.down.size(); ++j) n += a.down[j].size() + a.up[j].size();
  }
  return n;
}

std::string adapter_set_to_string(const AdapterSet& set) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < set.size(); ++i) os << (i ? "," : "") << set[i];
  os << '}';
  return os.str();
}

void validate_adapter_set(const AdapterSet& set, std::size_t stack_size) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i] != static_cast<int>(i) + 1) {
      throw std::invalid_argument("invalid adapter combination " + adapter_set_to_string(set) +
                                  ": stack must be contiguous from adapter 1");
    }
  }
  if (set.size() > stack_size) {
    throw std::invalid_argument("invalid adapter combination " + adapter_set_to_string(set) +
                                ": stack holds " + std::to_string(stack_size) + " adapters");
  }
}

LoraStack init_lora_stack(const MlpParams& base, std::size_t count, std::size_t rank,
                          double scale, std::uint64_t seed) {
  LoraStack stack;
  for (std::size_t i = 0; i < count; ++i) {
    LoraAdapter adapter;
    adapter.rank = rank;
    adapter.scale = scale;
    for (std::size_t j = 0; j < base.layers.size(); ++j) {
      const std::size_t in = base.layers[j].weight.rows();
      const std::size_t out = base.layers[j].weight.cols();
      CounterRng rng(seed, Phase::kLoraInit, i, j);
      adapter.down.push_back(rng.normal_tensor({in, rank}, 0.01));
      adapter.up.emplace_back(Shape{rank, out}, 0.0);
    }
    stack.adapters.push_back(std::move(adapter));
    stack.trainable.push_back(true);
  }
  return stack;
}

Tensor lora_forward(const Tensor& weight, std::span<const LoraDelta> deltas, const Tensor& x) {
  Tensor h = matmul(x, weight);
  for (const LoraDelta& d : deltas) {
    const Tensor delta = matmul(matmul(x, *d.down), *d.up);
    h = d.scale == 1.0 ? h + delta : h + d.scale * delta;
  }
  return h;
}

Tensor merge_lora(const Tensor& weight, std::span<const LoraDelta> deltas) {
  Tensor merged = weight;
  for (const LoraDelta& d : deltas) {
    const Tensor delta = matmul(*d.down, *d.up);
    merged = d.scale == 1.0 ? merged + delta : merged + d.scale * delta;
  }
  return merged;
}

}  // namespace shortft
