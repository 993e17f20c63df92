// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/shortcut.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "shortft/rng.hpp"

namespace shortft {

StudentParams init_student(const MlpConfig& config, int horizon, double guidance_scale,
                           std::uint64_t seed) {
  StudentParams s;
  s.config = config;
  s.horizon = horizon;
  s.guidance_scale = guidance_scale;
  s.net = init_mlp(ParamRole::kStudent,
                   config.data_dim + 2 * config.time_dim + config.class_dim, config.hidden,
                   config.depth, config.data_dim, config.num_classes + 1, config.class_dim,
                   seed);
  s.time_table = sinusoidal_time_table(horizon, config.time_dim);
  return s;
}

Var student_forward(Tape& tape, const StudentParams& student, const NoiseSchedule& schedule,
                    Var x, std::span<const int> t_from, std::span<const int> t_to,
                    std::span<const int> classes, bool trainable) {
  const std::size_t n = x.value().rows();
  const std::size_t d = x.value().cols();
  if (t_from.size() != n || t_to.size() != n || classes.size() != n) {
    throw ShapeError("student_forward: per-row arguments do not match " + std::to_string(n) +
                     " rows");
  }
  Tensor carry({n, d});
  Tensor gain({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const StepCoefficients c = ddim_coefficients(schedule, t_from[r], t_to[r], 0.0);
    // Gaussian skip on the implied noise estimate, as in the teacher.
    const double skip =
        std::sqrt(1.0 - schedule.alpha_bar[static_cast<std::size_t>(t_from[r])]);
    for (std::size_t q = 0; q < d; ++q) {
      carry.at(r, q) = c.a + c.b * skip;
      gain.at(r, q) = c.b;
    }
  }
  const auto emb_index = static_cast<std::uint32_t>(2 * student.net.layers.size());
  Var table = tape.param(ParamId{ParamRole::kStudent, emb_index}, student.net.class_embedding,
                         trainable);
  Var onehot = tape.constant(class_one_hot(classes, student.config.num_classes));
  Var input = concat_cols(concat_cols(x, tape.constant(time_features(student.time_table, t_from))),
                          concat_cols(tape.constant(time_features(student.time_table, t_to)),
                                      matmul(onehot, table)));
  Var eps = mlp_forward(tape, student.net, input, Binding{trainable, nullptr, {}});
  return x * tape.constant(std::move(carry)) + eps * tape.constant(std::move(gain));
}

bool is_valid_jump(const SegmentPlan& plan, int t_from, int t_to) {
  if (std::find(plan.step_list.begin(), plan.step_list.end(), t_from) == plan.step_list.end()) {
    return false;
  }
  return t_to == plan.next_lora_below(t_from);
}

Var shortcut_jump(Tape& tape, const StudentParams& student, const NoiseSchedule& schedule,
                  const SegmentPlan& plan, Var x_t, int t_from, int t_to,
                  std::span<const int> conditions) {
  if (!is_valid_jump(plan, t_from, t_to)) {
    throw std::invalid_argument("shortcut_jump: no shortcut " + std::to_string(t_from) + "->" +
                                std::to_string(t_to) + " in the segment plan");
  }
  const std::size_t n = x_t.value().rows();
  const std::vector<int> from(n, t_from);
  const std::vector<int> to(n, t_to);
  return student_forward(tape, student, schedule, x_t, from, to, conditions, false);
}

std::vector<int> shortcut_path(const SegmentPlan& plan, int t) {
  std::vector<int> path{t};
  while (t > 0) {
    t = plan.next_lora_below(t);
    path.push_back(t);
  }
  return path;
}

Tensor shortcut_to_zero(const StudentParams& student, const NoiseSchedule& schedule,
                        const SegmentPlan& plan, const Tensor& x_t, int t,
                        std::span<const int> conditions) {
  if (!schedule.on_chain(t)) {
    throw std::out_of_range("shortcut_to_zero: t = " + std::to_string(t) + " is not on the chain");
  }
  Tape tape;
  NoGradGuard guard(tape);
  const std::vector<int> path = shortcut_path(plan, t);
  Var x = tape.constant_ref(x_t);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    x = shortcut_jump(tape, student, schedule, plan, x, path[i], path[i + 1], conditions);
  }
  return x.value();
}

Tensor predict_x0_one_step(const DenoiserParams& teacher, const Tensor& x_t, int t,
                           std::span<const int> conditions, const NoiseSchedule& schedule,
                           double guidance_scale) {
  if (t < 1 || t > schedule.T) throw std::out_of_range("predict_x0_one_step: t outside [1, T]");
  Tape tape;
  NoGradGuard guard(tape);
  const Tensor eps =
      denoise_eps(tape, teacher, Binding{}, tape.constant_ref(x_t), t, conditions, guidance_scale)
          .value();
  const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double noise_scale = std::sqrt(1.0 - ab);
  const double inv = 1.0 / std::sqrt(ab);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - noise_scale * eps[i]) * inv;
  return out;
}

Tensor teacher_subchain(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                        const Tensor& x, int t_from, int t_to, std::span<const int> conditions,
                        double guidance_scale) {
  Tensor cur = x;
  int t = t_from;
  while (t > t_to) {
    const int next = schedule.successor(t);
    if (next < t_to) {
      throw std::invalid_argument("teacher_subchain: " + std::to_string(t_to) +
                                  " is not on the chain below " + std::to_string(t_from));
    }
    Tape tape;
    NoGradGuard guard(tape);
    const Tensor eps =
        denoise_eps(tape, teacher, Binding{}, tape.constant_ref(cur), t, conditions,
                    guidance_scale)
            .value();
    cur = ddim_step(cur, eps, ddim_coefficients(schedule, t, next, 0.0), nullptr);
    t = next;
  }
  return cur;
}

namespace {

int landing_segment(const SegmentPlan& plan, int t_to) {
  return t_to == 0 ? plan.k : plan.segment_of(t_to);
}

// x_t = forward_diffuse(x0, t) for `count` data rows drawn from `data`.
void draw_states(const Dataset& data, const NoiseSchedule& schedule, int t, std::size_t count,
                 CounterRng& rng, Tensor& x_t, std::vector<int>& classes) {
  const std::size_t d = data.dim();
  Tensor x0({count, d});
  classes.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t row = rng.below(data.size());
    classes[r] = data.labels[row];
    for (std::size_t q = 0; q < d; ++q) x0.at(r, q) = data.x.at(row, q);
  }
  x_t = forward_diffuse(x0, t, rng.normal_tensor({count, d}), schedule);
}

void append_rows(Tensor& dst, const Tensor& src) {
  if (dst.rank() != 2 || dst.rows() == 0) {
    dst = src;
    return;
  }
  std::vector<double> v(dst.values());
  v.insert(v.end(), src.data().begin(), src.data().end());
  dst = Tensor({dst.rows() + src.rows(), dst.cols()}, std::move(v));
}

ProbeSet build_pairs(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                     const SegmentPlan& plan, const Dataset& data, std::size_t per_step,
                     double guidance_scale, std::uint64_t seed, Phase phase) {
  ProbeSet p;
  p.x_t = Tensor({0, data.dim()});
  p.target = Tensor({0, data.dim()});
  for (std::size_t i = 0; i < schedule.step_list.size(); ++i) {
    const int t = schedule.step_list[i];
    const int to = plan.next_lora_below(t);
    CounterRng rng(seed, phase, i);
    Tensor x_t;
    std::vector<int> classes;
    draw_states(data, schedule, t, per_step, rng, x_t, classes);
    const Tensor target = teacher_subchain(teacher, schedule, x_t, t, to, classes, guidance_scale);
    append_rows(p.x_t, x_t);
    append_rows(p.target, target);
    p.t_from.insert(p.t_from.end(), per_step, t);
    p.t_to.insert(p.t_to.end(), per_step, to);
    p.classes.insert(p.classes.end(), classes.begin(), classes.end());
    p.segment.insert(p.segment.end(), per_step, landing_segment(plan, to));
  }
  return p;
}

}  // namespace

ProbeSet make_probes(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                     const SegmentPlan& plan, const Dataset& data, std::size_t per_step,
                     double guidance_scale, std::uint64_t seed, Phase phase) {
  return build_pairs(teacher, schedule, plan, data, per_step, guidance_scale, seed, phase);
}

std::vector<double> probe_mse(const StudentParams& student, const NoiseSchedule& schedule,
                              const SegmentPlan& plan, const ProbeSet& probes) {
  std::vector<double> sum(static_cast<std::size_t>(plan.k), 0.0);
  std::vector<double> count(static_cast<std::size_t>(plan.k), 0.0);
  const std::size_t n = probes.t_from.size();
  const std::size_t d = probes.x_t.cols();
  constexpr std::size_t kChunk = 1024;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    Tape tape;
    NoGradGuard guard(tape);
    const std::span<const int> from(probes.t_from.data() + begin, end - begin);
    const std::span<const int> to(probes.t_to.data() + begin, end - begin);
    const std::span<const int> cls(probes.classes.data() + begin, end - begin);
    const Tensor pred = student_forward(tape, student, schedule,
                                        tape.constant(probes.x_t.slice_rows(begin, end)), from, to,
                                        cls)
                            .value();
    for (std::size_t r = begin; r < end; ++r) {
      double e = 0.0;
      for (std::size_t q = 0; q < d; ++q) {
        const double diff = pred.at(r - begin, q) - probes.target.at(r, q);
        e += diff * diff;
      }
      const auto seg = static_cast<std::size_t>(probes.segment[r] - 1);
      sum[seg] += e / static_cast<double>(d);
      count[seg] += 1.0;
    }
  }
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] = count[j] > 0 ? sum[j] / count[j] : 0.0;
  return sum;
}

DistillResult distill_student(const DenoiserParams& teacher, const NoiseSchedule& schedule,
                              const SegmentPlan& plan, const Dataset& data,
                              const MlpConfig& student_config, const DistillConfig& config,
                              double teacher_loss) {
  if (config.batch == 0 || config.epoch_steps == 0) {
    throw std::invalid_argument("distill_student: batch and epoch_steps must be positive");
  }
  DistillResult result;
  DistillReport& report = result.report;
  if (!(teacher_loss <= config.teacher_loss_threshold)) {
    report.warnings.push_back("teacher not converged: base loss " + std::to_string(teacher_loss) +
                              " above threshold " +
                              std::to_string(config.teacher_loss_threshold));
  }
  {
    double mean = 0.0, sq = 0.0;
    for (double v : data.x.data()) mean += v;
    mean /= static_cast<double>(data.x.size());
    for (double v : data.x.data()) sq += (v - mean) * (v - mean);
    report.data_variance = sq / static_cast<double>(data.x.size());
  }

  const std::size_t steps_n = schedule.step_list.size();
  const std::size_t per_step =
      std::max<std::size_t>(1, static_cast<std::size_t>(static_cast<double>(config.pool_size) *
                                                        (1.0 - config.identity_fraction)) /
                                   steps_n);
  ProbeSet pool = build_pairs(teacher, schedule, plan, data, per_step, config.guidance_scale,
                              config.seed, Phase::kDistillPool);
  {
    // Zero-length jumps: the target is the input itself.
    const auto identity_n = static_cast<std::size_t>(static_cast<double>(config.pool_size) *
                                                     config.identity_fraction);
    CounterRng rng(config.seed, Phase::kDistillPool, steps_n);
    std::vector<double> rows;
    rows.reserve(identity_n * data.dim());
    for (std::size_t r = 0; r < identity_n; ++r) {
      const int t = schedule.step_list[rng.below(steps_n)];
      Tensor x_t;
      std::vector<int> cls;
      draw_states(data, schedule, t, 1, rng, x_t, cls);
      rows.insert(rows.end(), x_t.data().begin(), x_t.data().end());
      pool.t_from.push_back(t);
      pool.t_to.push_back(t);
      pool.classes.push_back(cls[0]);
      pool.segment.push_back(plan.segment_of(t));
    }
    if (identity_n > 0) {
      const Tensor block({identity_n, data.dim()}, std::move(rows));
      append_rows(pool.x_t, block);
      append_rows(pool.target, block);
    }
  }
  const ProbeSet probes =
      build_pairs(teacher, schedule, plan, data, config.probes_per_step, config.guidance_scale,
                  config.seed, Phase::kDistillProbes);
  report.probe_count = probes.t_from.size();

  StudentParams student =
      init_student(student_config, schedule.T, config.guidance_scale, config.seed);
  AdamW opt(config.optimizer);
  const std::vector<ParamRef> refs = student.net.refs();
  std::vector<GradRequest> requests;
  for (const ParamRef& r : refs) requests.push_back({r.id, r.value->shape()});

  const std::size_t pool_n = pool.t_from.size();
  const std::size_t d = data.dim();
  double epoch_loss = 0.0;
  std::size_t epoch_count = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    CounterRng rng(config.seed, Phase::kDistillTrain, step);
    Tensor xb({config.batch, d}), tb({config.batch, d});
    std::vector<int> from(config.batch), to(config.batch), cls(config.batch);
    for (std::size_t r = 0; r < config.batch; ++r) {
      const std::size_t i = rng.below(pool_n);
      for (std::size_t q = 0; q < d; ++q) {
        xb.at(r, q) = pool.x_t.at(i, q);
        tb.at(r, q) = pool.target.at(i, q);
      }
      from[r] = pool.t_from[i];
      to[r] = pool.t_to[i];
      cls[r] = pool.classes[i];
    }
    Tape tape;
    Var pred = student_forward(tape, student, schedule, tape.constant(std::move(xb)), from, to,
                               cls, true);
    Var loss = mean(square(pred - tape.constant(std::move(tb))));
    const GradMap grads = tape.backward(loss, requests);
    opt.set_lr(cosine_lr(config.optimizer.lr, step, config.steps, 0.02));
    opt.step(refs, grads);
    epoch_loss += loss.value().item();
    ++epoch_count;
    if (epoch_count == config.epoch_steps || step + 1 == config.steps) {
      DistillEpoch e;
      e.epoch = report.epochs.size() + 1;
      e.loss = epoch_loss / static_cast<double>(epoch_count);
      e.heldout_mse = probe_mse(student, schedule, plan, probes);
      report.epochs.push_back(std::move(e));
      epoch_loss = 0.0;
      epoch_count = 0;
    }
  }
  if (report.epochs.empty()) {
    DistillEpoch e;
    e.heldout_mse = probe_mse(student, schedule, plan, probes);
    report.epochs.push_back(std::move(e));
  }
  result.student = std::move(student);
  return result;
}

}  // namespace shortft
