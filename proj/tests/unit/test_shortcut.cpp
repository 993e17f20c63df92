// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "shortft/dataset.hpp"
#include "shortft/shortcut.hpp"

using namespace shortft;

namespace {

MlpConfig tiny(std::size_t dim = 2) {
  MlpConfig c;
  c.data_dim = dim;
  c.hidden = 16;
  c.depth = 2;
  c.time_dim = 8;
  c.class_dim = 4;
  return c;
}

struct Fixture {
  NoiseSchedule schedule = build_schedule(1000, ScheduleKind::kLinear, 50);
  SegmentPlan plan = build_segment_plan(schedule, 4);
};

void zero_output(MlpParams& net) {
  for (double& v : net.layers.back().weight.data()) v = 0.0;
  for (double& v : net.layers.back().bias.data()) v = 0.0;
}

Tensor jump(const StudentParams& s, const NoiseSchedule& schedule, const Tensor& x, int from,
            int to, const std::vector<int>& cls) {
  Tape tape;
  const std::vector<int> f(x.rows(), from), t(x.rows(), to);
  return student_forward(tape, s, schedule, tape.constant_ref(x), f, t, cls).value();
}

}  // namespace

TEST_CASE("jump validity follows the LoRA timesteps") {
  Fixture f;
  CHECK(is_valid_jump(f.plan, 741, 501));
  CHECK(is_valid_jump(f.plan, 481, 261));
  CHECK(is_valid_jump(f.plan, 241, 1));
  CHECK(is_valid_jump(f.plan, 981, 761));
  CHECK(is_valid_jump(f.plan, 1, 0));
  CHECK_FALSE(is_valid_jump(f.plan, 741, 481));
  CHECK_FALSE(is_valid_jump(f.plan, 740, 501));
  CHECK_FALSE(is_valid_jump(f.plan, 501, 501));
  for (const ShortcutSpan& s : f.plan.shortcut_spans) CHECK(is_valid_jump(f.plan, s.from, s.to));
}

TEST_CASE("shortcut path composes jumps down to zero") {
  Fixture f;
  CHECK(shortcut_path(f.plan, 741) == std::vector<int>{741, 501, 261, 1, 0});
  CHECK(shortcut_path(f.plan, 481) == std::vector<int>{481, 261, 1, 0});
  CHECK(shortcut_path(f.plan, 1) == std::vector<int>{1, 0});
}

TEST_CASE("invalid shortcut is rejected") {
  Fixture f;
  const StudentParams s = init_student(tiny(), 1000, 2.0, 1);
  Tape tape;
  Var x = tape.constant(Tensor({1, 2}));
  const std::vector<int> cls{0};
  CHECK_THROWS_AS(shortcut_jump(tape, s, f.schedule, f.plan, x, 741, 481, cls),
                  std::invalid_argument);
}

TEST_CASE("zero-length jump is the identity") {
  Fixture f;
  const StudentParams s = init_student(tiny(), 1000, 2.0, 2);
  CounterRng rng(3, Phase::kTest);
  const Tensor x = rng.normal_tensor({5, 2});
  const std::vector<int> cls{0, 1, 0, 1, kNullClass};
  const Tensor y = jump(s, f.schedule, x, 501, 501, cls);
  CHECK(std::memcmp(y.data().data(), x.data().data(), x.size() * sizeof(double)) == 0);
}

TEST_CASE("student with a silent network is the unit-Gaussian DDIM jump") {
  // For x0 ~ N(0, I), E[eps | x_t] = sqrt(1 - abar_t)·x_t.
  Fixture f;
  StudentParams s = init_student(tiny(), 1000, 2.0, 4);
  zero_output(s.net);
  CounterRng rng(5, Phase::kTest);
  const Tensor x = rng.normal_tensor({4, 2});
  const std::vector<int> cls{0, 1, 0, 1};
  const Tensor y = jump(s, f.schedule, x, 741, 501, cls);
  const double ab_from = f.schedule.alpha_bar[741];
  const double ab_to = f.schedule.alpha_bar[501];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eps = std::sqrt(1.0 - ab_from) * x[i];
    const double x0 = (x[i] - std::sqrt(1.0 - ab_from) * eps) / std::sqrt(ab_from);
    CHECK(y[i] == doctest::Approx(std::sqrt(ab_to) * x0 + std::sqrt(1.0 - ab_to) * eps)
                      .epsilon(1e-12));
  }
}

TEST_CASE("one-step x0 prediction matches its closed form") {
  Fixture f;
  const DenoiserParams teacher = init_denoiser(tiny(), 1000, 6);
  CounterRng rng(7, Phase::kTest);
  const Tensor x = rng.normal_tensor({3, 2});
  const std::vector<int> cls{0, 1, 1};
  Tape tape;
  const Tensor eps =
      denoise_eps(tape, teacher, Binding{}, tape.constant_ref(x), 501, cls, 2.0).value();
  const Tensor x0 = predict_x0_one_step(teacher, x, 501, cls, f.schedule, 2.0);
  const double ab = f.schedule.alpha_bar[501];
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x0[i] == doctest::Approx((x[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab)));
  }
}

TEST_CASE("teacher sub-chain is the composition of DDIM steps") {
  Fixture f;
  const DenoiserParams teacher = init_denoiser(tiny(), 1000, 8);
  CounterRng rng(9, Phase::kTest);
  Tensor x = rng.normal_tensor({2, 2});
  const std::vector<int> cls{1, 0};
  const Tensor got = teacher_subchain(teacher, f.schedule, x, 301, 241, cls, 2.0);
  for (int t = 301; t > 241; t -= 20) {
    Tape tape;
    const Tensor eps =
        denoise_eps(tape, teacher, Binding{}, tape.constant_ref(x), t, cls, 2.0).value();
    x = ddim_step(x, eps, ddim_coefficients(f.schedule, t, t - 20, 0.0), nullptr);
  }
  CHECK(max_abs_diff(got, x) < 1e-12);
  const Tensor to_zero = teacher_subchain(teacher, f.schedule, x, 1, 0, cls, 2.0);
  CHECK(to_zero.all_finite());
}

TEST_CASE("distillation reduces held-out endpoint error and is deterministic") {
  Fixture f;
  const Dataset data = generate_dataset(TaskKind::kPoints2d, 512, 11);
  DenoiserParams teacher = init_denoiser(tiny(), f.schedule, 12);
  DistillConfig cfg;
  cfg.steps = 150;
  cfg.batch = 64;
  cfg.pool_size = 2000;
  cfg.probes_per_step = 2;
  cfg.epoch_steps = 50;
  cfg.seed = 13;
  const DistillResult a = distill_student(teacher, f.schedule, f.plan, data, tiny(), cfg, 0.5);
  const DistillResult b = distill_student(teacher, f.schedule, f.plan, data, tiny(), cfg, 0.5);
  REQUIRE(a.report.epochs.size() == 3);
  CHECK(a.report.probe_count == 2 * f.schedule.step_list.size());
  const auto& first = a.report.epochs.front().heldout_mse;
  const auto& last = a.report.final_heldout();
  REQUIRE(last.size() == 4);
  double s_first = 0.0, s_last = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    s_first += first[j];
    s_last += last[j];
  }
  CHECK(s_last < s_first);
  CHECK(a.report.warnings.empty());
  CHECK(a.report.final_heldout() == b.report.final_heldout());
}

TEST_CASE("weak teacher triggers a warning") {
  Fixture f;
  const Dataset data = generate_dataset(TaskKind::kPoints2d, 64, 1);
  const DenoiserParams teacher = init_denoiser(tiny(), 1000, 1);
  DistillConfig cfg;
  cfg.steps = 1;
  cfg.batch = 8;
  cfg.pool_size = 100;
  cfg.probes_per_step = 1;
  const DistillResult r = distill_student(teacher, f.schedule, f.plan, data, tiny(), cfg, 5.0);
  CHECK_FALSE(r.report.warnings.empty());
}
