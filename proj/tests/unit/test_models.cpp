// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "shortft/gradcheck.hpp"
#include "shortft/models.hpp"
#include "shortft/rng.hpp"

using namespace shortft;

namespace {

MlpConfig small_config() {
  MlpConfig c;
  c.hidden = 16;
  c.depth = 2;
  c.time_dim = 8;
  c.class_dim = 4;
  return c;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

Tensor eps_of(const DenoiserParams& p, const Binding& b, const Tensor& x, int t,
              const std::vector<int>& cond, double w) {
  Tape tape;
  return denoise_eps(tape, p, b, tape.constant_ref(x), t, cond, w).value();
}

// Gives every adapter non-zero up matrices so the deltas are visible.
void randomize(LoraStack& stack, std::uint64_t seed) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    for (std::size_t j = 0; j < stack.adapters[i].up.size(); ++j) {
      CounterRng r(seed, Phase::kTest, i, j);
      Tensor& up = stack.adapters[i].up[j];
      up = r.normal_tensor(up.shape(), 0.5);
      Tensor& down = stack.adapters[i].down[j];
      down = r.normal_tensor(down.shape(), 0.3);
    }
  }
}

}  // namespace

TEST_CASE("segment plan under defaults reproduces the reference timesteps") {
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 50);
  const SegmentPlan p = build_segment_plan(s, 4);
  CHECK(p.delta_t == 250);
  CHECK(p.boundaries == std::vector<int>{750, 500, 250, 0});
  CHECK(p.lora_timesteps == std::vector<int>{761, 501, 261, 1});
  CHECK(p.shortcut_spans ==
        std::vector<ShortcutSpan>{{741, 501}, {481, 261}, {241, 1}});
  CHECK(p.segment_of(981) == 1);
  CHECK(p.segment_of(761) == 1);
  CHECK(p.segment_of(741) == 2);
  CHECK(p.segment_of(1) == 4);
  CHECK(p.segment_of(0) == 4);
  CHECK(p.is_span(741, 501));
  CHECK_FALSE(p.is_span(741, 499));
  CHECK(p.next_lora_below(741) == 501);
  CHECK(p.next_lora_below(1) == 0);
}

TEST_CASE("segment plan on a short horizon") {
  const NoiseSchedule s = build_schedule(100, ScheduleKind::kLinear, 10);
  REQUIRE(s.step_list.front() == 91);
  const SegmentPlan p = build_segment_plan(s, 2);
  CHECK(p.boundaries == std::vector<int>{50, 0});
  CHECK(p.lora_timesteps == std::vector<int>{51, 1});
  CHECK(p.shortcut_spans == std::vector<ShortcutSpan>{{41, 1}});
}

TEST_CASE("segment plan errors") {
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 3);
  CHECK_THROWS_AS(build_segment_plan(s, 1), std::invalid_argument);
  // 3 steps {667, 334, 1} cannot populate 8 segments of width 125.
  CHECK_THROWS_AS(build_segment_plan(s, 8), std::invalid_argument);
}

TEST_CASE("activation rules") {
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 50);
  const SegmentPlan p = build_segment_plan(s, 4);
  using M = ActivationMode;
  CHECK(active_adapters(p, 981, M::kTrainChain) == AdapterSet{1});
  CHECK(active_adapters(p, 761, M::kTrainChain) == AdapterSet{1});
  CHECK(active_adapters(p, 501, M::kTrainChain) == AdapterSet{1, 2});
  CHECK(active_adapters(p, 261, M::kTrainChain) == AdapterSet{1, 2, 3});
  CHECK(active_adapters(p, 1, M::kTrainChain) == AdapterSet{1, 2, 3, 4});
  CHECK(active_adapters(p, 601, M::kTrainChain).empty());
  CHECK(active_adapters(p, 601, M::kInference) == AdapterSet{1, 2});
  CHECK(active_adapters(p, 601, M::kInference, InferenceActivation::kAssignedStepOnly).empty());
  CHECK_THROWS_AS(active_adapters(p, 600, M::kInference), std::out_of_range);

  // Sets at successive LoRA timesteps strictly grow, and inference sets never
  // shrink along the chain.
  for (std::size_t j = 0; j + 1 < p.lora_timesteps.size(); ++j) {
    const AdapterSet a = active_adapters(p, p.lora_timesteps[j], M::kTrainChain);
    const AdapterSet b = active_adapters(p, p.lora_timesteps[j + 1], M::kTrainChain);
    CHECK(b.size() > a.size());
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::size_t prev = 0;
  for (int t : s.step_list) {
    const std::size_t n = active_adapters(p, t, M::kInference).size();
    CHECK(n >= prev);
    prev = n;
  }
  CHECK(inference_adapters(p, 1, AdapterLayout::kShared, InferenceActivation::kSegment, 601) ==
        AdapterSet{1});
}

TEST_CASE("adapter sets must be stack prefixes") {
  CHECK_NOTHROW(validate_adapter_set({}, 4));
  CHECK_NOTHROW(validate_adapter_set({1, 2, 3}, 4));
  CHECK_THROWS_AS(validate_adapter_set({2}, 4), std::invalid_argument);
  CHECK_THROWS_AS(validate_adapter_set({1, 3}, 4), std::invalid_argument);
  CHECK_THROWS_AS(validate_adapter_set({1, 2, 3}, 2), std::invalid_argument);
}

TEST_CASE("lora_forward and merge_lora") {
  CounterRng r(1, Phase::kTest);
  const Tensor W = r.normal_tensor({8, 6});
  const Tensor x = r.normal_tensor({100, 8});
  CHECK(lora_forward(W, {}, x) == matmul(x, W));
  CHECK(merge_lora(W, {}) == W);

  const Tensor a1 = r.normal_tensor({8, 2}), b1 = r.normal_tensor({2, 6});
  const Tensor a2 = r.normal_tensor({8, 2}), b2 = r.normal_tensor({2, 6});
  const Tensor zero({2, 6}, 0.0);
  const std::vector<LoraDelta> zd{{&a1, &zero, 1.0}};
  CHECK(lora_forward(W, zd, x) == matmul(x, W));

  const std::vector<LoraDelta> two{{&a1, &b1, 1.0}, {&a2, &b2, 1.0}};
  const Tensor h = lora_forward(W, two, x);
  const Tensor direct = matmul(x, W) + matmul(matmul(x, a1), b1) + matmul(matmul(x, a2), b2);
  CHECK(max_abs_diff(h, direct) < 1e-12);

  const Tensor merged = merge_lora(W, two);
  const Tensor hm = matmul(x, merged);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    worst = std::max(worst, std::abs(hm[i] - h[i]) / (std::abs(h[i]) + 1e-8));
  }
  CHECK(worst < 1e-5);
  const Tensor back = merged - matmul(a1, b1) - matmul(a2, b2);
  CHECK(max_abs_diff(back, W) < 1e-10);
}

TEST_CASE("zero-initialized stack leaves the denoiser bitwise unchanged") {
  const DenoiserParams p = init_denoiser(small_config(), 1000, 3);
  const LoraStack stack = init_lora_stack(p.net, 4, 4, 1.0, 3);
  CHECK(stack.parameter_count() > 0);
  CounterRng r(2, Phase::kTest);
  const Tensor x = r.normal_tensor({5, 2});
  const std::vector<int> cond{0, 1, 0, 1, 0};
  const Tensor base = eps_of(p, Binding{}, x, 501, cond, 2.0);
  for (int n = 1; n <= 4; ++n) {
    AdapterSet set;
    for (int i = 1; i <= n; ++i) set.push_back(i);
    CHECK(bitwise_equal(eps_of(p, Binding{false, &stack, set}, x, 501, cond, 2.0), base));
  }
}

TEST_CASE("guidance identities") {
  const DenoiserParams p = init_denoiser(small_config(), 1000, 4);
  CounterRng r(3, Phase::kTest);
  const Tensor x = r.normal_tensor({3, 2});
  const std::vector<int> cond{1, 0, 1};
  const std::vector<int> nulls(3, kNullClass);
  Tape tape;
  const std::vector<int> ts(3, 301);
  const Tensor eu = denoiser_forward(tape, p, {}, tape.constant_ref(x), ts, nulls).value();
  const Tensor ec = denoiser_forward(tape, p, {}, tape.constant_ref(x), ts, cond).value();
  CHECK(bitwise_equal(eps_of(p, {}, x, 301, cond, 0.0), eu));
  CHECK(bitwise_equal(eps_of(p, {}, x, 301, cond, 1.0), ec));
  const Tensor e2 = eps_of(p, {}, x, 301, cond, 2.0);
  CHECK(max_abs_diff(e2, eu + 2.0 * (ec - eu)) < 1e-12);
  CHECK_THROWS_AS(eps_of(p, {}, x, 301, {2, 0, 1}, 2.0), std::invalid_argument);
}

TEST_CASE("merged weights reproduce the adapted denoiser") {
  DenoiserParams p = init_denoiser(small_config(), 1000, 5);
  LoraStack stack = init_lora_stack(p.net, 2, 4, 1.0, 5);
  randomize(stack, 9);
  CounterRng r(4, Phase::kTest);
  const Tensor x = r.normal_tensor({100, 2});
  const std::vector<int> cond(100, 1);
  const Tensor adapted = eps_of(p, Binding{false, &stack, {1, 2}}, x, 101, cond, 2.0);
  DenoiserParams merged = p;
  for (std::size_t j = 0; j < merged.net.layers.size(); ++j) {
    const std::vector<LoraDelta> d{{&stack.adapters[0].down[j], &stack.adapters[0].up[j], 1.0},
                                   {&stack.adapters[1].down[j], &stack.adapters[1].up[j], 1.0}};
    merged.net.layers[j].weight = merge_lora(p.net.layers[j].weight, d);
  }
  const Tensor folded = eps_of(merged, {}, x, 101, cond, 2.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < folded.size(); ++i) {
    worst = std::max(worst, std::abs(folded[i] - adapted[i]) / (std::abs(adapted[i]) + 1e-8));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("adapter gradients through a short sampling chain match central differences") {
  const DenoiserParams p = init_denoiser(small_config(), 1000, 6);
  LoraStack stack = init_lora_stack(p.net, 1, 2, 1.0, 6);
  randomize(stack, 11);
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 4);
  CounterRng r(5, Phase::kTest);
  const Tensor x_T = r.normal_tensor({3, 2});
  const std::vector<int> cond{0, 1, 1};
  Tensor& target = stack.adapters[0].up[1];
  const ParamId id = LoraStack::up_id(0, 1);

  auto objective = [&](Tape& tape) {
    Var x = tape.constant_ref(x_T);
    for (std::size_t i = 0; i < s.step_list.size(); ++i) {
      const int tf = s.step_list[i];
      const int tt = i + 1 < s.step_list.size() ? s.step_list[i + 1] : 0;
      Var e = denoise_eps(tape, p, Binding{false, &stack, {1}}, x, tf, cond, 2.0);
      x = ddim_step(x, e, ddim_coefficients(s, tf, tt, 0.0), nullptr);
    }
    return mean(square(x));
  };
  const Tensor origin = target;
  const ValueFn value = [&](std::span<const double> pt) {
    std::copy(pt.begin(), pt.end(), target.data().begin());
    Tape tape;
    const double v = objective(tape).value().item();
    target = origin;
    return v;
  };
  const GradFn grad = [&](std::span<const double> pt) {
    std::copy(pt.begin(), pt.end(), target.data().begin());
    Tape tape;
    const GradRequest req{id, target.shape()};
    auto g = tape.backward(objective(tape), std::span(&req, 1)).at(id).values();
    target = origin;
    return g;
  };
  CHECK(finite_diff_check(value, grad, origin.data(), 1e-5) < 1e-3);
}

TEST_CASE("class one-hot and time features") {
  const Tensor oh = class_one_hot(std::vector<int>{1, kNullClass}, 2);
  CHECK(oh == Tensor::matrix(2, 3, {0, 1, 0, 0, 0, 1}));
  const Tensor table = sinusoidal_time_table(10, 4);
  CHECK(table.at(0, 0) == 0.0);
  CHECK(table.at(0, 2) == 1.0);
  CHECK_THROWS_AS(time_features(table, std::vector<int>{11}), std::out_of_range);
}
