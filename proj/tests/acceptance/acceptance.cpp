// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner. Each criterion prints one line:
//   [PASS] criterion N: <details>   or   [FAIL] criterion N: <details>
// Criteria 5 and 7-10 share trained base models and students cached per task
// under --cache; the cache is built on first use.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shortft/align.hpp"
#include "shortft/gradcheck.hpp"
#include "shortft/harness.hpp"
#include "shortft/rng.hpp"

namespace fs = std::filesystem;
using namespace shortft;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

bool quiet = false;

void note(const std::string& msg) {
  if (!quiet) std::cerr << "  " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Shared artifacts

fs::path cache_root;

ExperimentConfig task_config(TaskKind task) { return ExperimentConfig::defaults(task); }

std::string task_dir_name(TaskKind task) {
  return task == TaskKind::kBars16 ? "bars16" : "points2d";
}

bool has_student(const fs::path& dir) {
  if (!fs::exists(dir / kManifestName)) return false;
  try {
    return load_checkpoint(dir).has_prefix("student.");
  } catch (const CheckpointError&) {
    return false;
  }
}

/// Base model, critic and student for the task defaults.
fs::path cached_task(TaskKind task) {
  const fs::path dir = cache_root / task_dir_name(task);
  if (has_student(dir)) return dir;
  const ExperimentConfig config = task_config(task);
  note("building cache " + dir.string());
  cmd_train_base(config, RunOptions{dir, true, quiet});
  cmd_distill(config, RunOptions{dir, true, quiet});
  return dir;
}

/// Fresh copy of the cached artifacts (no adapters) for a run that writes.
fs::path workspace(TaskKind task, const std::string& name) {
  const fs::path src = cached_task(task);
  const fs::path dst = cache_root / "runs" / (task_dir_name(task) + "_" + name);
  fs::remove_all(dst);
  fs::create_directories(dst);
  for (const char* f : {kManifestName, kBlobName, "config.ini"}) {
    fs::copy_file(src / f, dst / f);
  }
  return dst;
}

bool needs_critic(const ExperimentConfig& config) {
  return config.reward.kind == RewardKind::kCritic || config.reward.kind == RewardKind::kCombined;
}

double eval_mean(const Lab& lab, const LoraStack* stack, AdapterLayout layout) {
  return evaluate(lab, stack, layout, {lab.config.reward}, lab.config.eval.n,
                  lab.config.eval.seed)
      .at(0)
      .mean;
}

double tuned_mean(const Lab& lab, const StrategyConfig& strategy) {
  const FinetuneResult r = run_finetune_phase(lab, strategy);
  const AdapterLayout layout =
      r.stack.size() > 1 ? AdapterLayout::kTimestepAware : AdapterLayout::kShared;
  return eval_mean(lab, &r.stack, layout);
}

// ---------------------------------------------------------------------------
// 1. Autodiff against central differences

struct Flat {
  std::vector<ParamRef> refs;
  std::vector<double> values() const {
    std::vector<double> v;
    for (const ParamRef& r : refs) v.insert(v.end(), r.value->data().begin(), r.value->data().end());
    return v;
  }
  void assign(std::span<const double> v) const {
    std::size_t o = 0;
    for (const ParamRef& r : refs) {
      auto d = r.value->data();
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(o),
                v.begin() + static_cast<std::ptrdiff_t>(o + d.size()), d.begin());
      o += d.size();
    }
  }
};

Var network_head(int kind, Var out) {
  switch (kind) {
    case 0:
      return mean(square(out));
    case 1:
      return sum(tanh(out) * tanh(out)) + mean(silu(out));
    case 2:
      return scale(mean(log_softmax(out)), -1.0);
    default:
      return mean(smooth_abs(out, 1e-2)) + mean(square(slice_cols(out, 0, 1)));
  }
}

double op_gradcheck_worst() {
  double worst = 0.0;
  for (std::uint64_t n = 0; n < 20; ++n) {
    CounterRng r(1000 + n, Phase::kTest);
    const std::size_t in = 2 + r.below(4);
    const std::size_t hidden = 3 + r.below(6);
    const std::size_t depth = 1 + r.below(3);
    const std::size_t out_dim = 2 + r.below(3);
    MlpParams net = init_mlp(ParamRole::kCritic, in, hidden, depth, out_dim, 0, 0, n);
    for (ParamRef& ref : net.refs()) *ref.value = r.normal_tensor(ref.value->shape(), 0.5);
    const Tensor x = r.normal_tensor({5, in});
    const int head = static_cast<int>(n % 4);
    const Flat flat{net.refs()};
    std::vector<GradRequest> wrt;
    for (const ParamRef& ref : flat.refs) wrt.push_back({ref.id, ref.value->shape()});

    const ValueFn value = [&](std::span<const double> p) {
      flat.assign(p);
      Tape tape;
      return network_head(head, mlp_forward(tape, net, tape.constant_ref(x), Binding{true, nullptr, {}}))
          .value()
          .item();
    };
    const GradFn grad = [&](std::span<const double> p) {
      flat.assign(p);
      Tape tape;
      Var loss =
          network_head(head, mlp_forward(tape, net, tape.constant_ref(x), Binding{true, nullptr, {}}));
      const GradMap g = tape.backward(loss, wrt);
      std::vector<double> out;
      for (const GradRequest& w : wrt) {
        const Tensor& t = g.at(w.id);
        out.insert(out.end(), t.data().begin(), t.data().end());
      }
      return out;
    };
    const std::vector<double> point = flat.values();
    worst = std::max(worst, finite_diff_check(value, grad, point, 1e-6));
    flat.assign(point);
  }
  return worst;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const double ops = op_gradcheck_worst();
  const fs::path dir = cache_root / "runs" / "gradcheck";
  fs::remove_all(dir);
  const double chain = cmd_gradcheck(task_config(TaskKind::kPoints2d), RunOptions{dir, true, true});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ops < 1e-4 && chain < 1e-3 && secs < 60.0,
          "networks max rel " + fmt(ops) + " (< 1e-4), stage-1 objective max rel " + fmt(chain) +
              " (< 1e-3), " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Plan arithmetic

Outcome criterion2() {
  const SegmentPlan plan = build_segment_plan(build_schedule(1000, ScheduleKind::kLinear, 50), 4);
  const std::vector<int> lora{761, 501, 261, 1};
  const std::vector<ShortcutSpan> spans{{741, 501}, {481, 261}, {241, 1}};
  const bool ok = plan.lora_timesteps == lora && plan.shortcut_spans == spans;
  std::string got = "lora {";
  for (int t : plan.lora_timesteps) got += std::to_string(t) + " ";
  got += "} spans ";
  for (const ShortcutSpan& s : plan.shortcut_spans) {
    got += "(" + std::to_string(s.from) + "->" + std::to_string(s.to) + ")";
  }
  return {ok, got};
}

// ---------------------------------------------------------------------------
// 3. DDIM algebra

Outcome criterion3() {
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 50);
  // Independent alpha_bar table in extended precision.
  std::vector<long double> ab(1001, 1.0L);
  for (int t = 1; t <= 1000; ++t) {
    const long double beta = 1e-4L + (2e-2L - 1e-4L) * static_cast<long double>(t - 1) / 999.0L;
    ab[static_cast<std::size_t>(t)] = ab[static_cast<std::size_t>(t - 1)] * (1.0L - beta);
  }
  std::vector<int> ts = s.step_list;
  ts.push_back(0);
  CounterRng r(3, Phase::kTest);
  const Tensor x = r.normal_tensor({8, 2});
  const Tensor e = r.normal_tensor({8, 2});
  const Tensor z = r.normal_tensor({8, 2});
  double worst = 0.0;
  std::size_t pairs = 0;
  for (double eta : {0.0, 0.5, 1.0}) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      for (std::size_t j = i + 1; j < ts.size(); ++j) {
        const long double af = ab[static_cast<std::size_t>(ts[i])];
        const long double at = ab[static_cast<std::size_t>(ts[j])];
        const long double sigma =
            static_cast<long double>(eta) * std::sqrt((1 - at) / (1 - af)) * std::sqrt(1 - af / at);
        const Tensor got = ddim_step(x, e, ddim_coefficients(s, ts[i], ts[j], eta), &z);
        for (std::size_t k = 0; k < x.size(); ++k) {
          const long double x0 = (x[k] - std::sqrt(1 - af) * e[k]) / std::sqrt(af);
          const long double want =
              std::sqrt(at) * x0 + std::sqrt(std::max(0.0L, 1 - at - sigma * sigma)) * e[k] +
              sigma * z[k];
          worst = std::max(worst, static_cast<double>(std::fabs(want - got[k])));
        }
        ++pairs;
      }
    }
  }

  const DenoiserParams p = init_denoiser(MlpConfig{}, s, 3);
  const SegmentPlan plan = build_segment_plan(s, 4);
  const Tensor xT = CounterRng(4, Phase::kTest).normal_tensor({64, 2});
  std::vector<int> cond(64);
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = static_cast<int>(i % 2);
  const Tensor a = sample(p, nullptr, plan, AdapterLayout::kShared,
                          InferenceActivation::kSegment, cond, xT, s, 2.0, 0.0, 1);
  const Tensor b = sample(p, nullptr, plan, AdapterLayout::kShared,
                          InferenceActivation::kSegment, cond, xT, s, 2.0, 0.0, 99);
  const bool bytes = a.shape() == b.shape() &&
                     std::equal(a.data().begin(), a.data().end(), b.data().begin(),
                                [](double u, double v) {
                                  return std::memcmp(&u, &v, sizeof(double)) == 0;
                                });
  return {worst < 1e-10 && bytes, std::to_string(pairs) + " step pairs, max abs diff " +
                                      fmt(worst) + " (< 1e-10), eta=0 rerun " +
                                      (bytes ? "byte-identical" : "differs")};
}

// ---------------------------------------------------------------------------
// 4. Adapter correctness

bool is_prefix_set(const AdapterSet& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != static_cast<int>(i + 1)) return false;
  }
  return true;
}

Outcome criterion4() {
  const NoiseSchedule s = build_schedule(1000, ScheduleKind::kLinear, 50);
  const SegmentPlan plan = build_segment_plan(s, 4);
  const DenoiserParams p = init_denoiser(MlpConfig{}, s, 4);
  const Tensor x = CounterRng(5, Phase::kTest).normal_tensor({128, 2});
  std::vector<int> cond(128);
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = static_cast<int>(i % 2);

  // Zero-init stack: every active set reproduces the base bitwise.
  const LoraStack fresh = init_lora_stack(p.net, 4, 4, 1.0, 4);
  bool bitwise = true;
  for (int t : s.step_list) {
    Tape base_tape;
    const Tensor base =
        denoise_eps(base_tape, p, {}, base_tape.constant_ref(x), t, cond, 2.0).value();
    for (int n = 1; n <= 4; ++n) {
      AdapterSet set;
      for (int a = 1; a <= n; ++a) set.push_back(a);
      Tape tape;
      const Tensor with =
          denoise_eps(tape, p, Binding{false, &fresh, set}, tape.constant_ref(x), t, cond, 2.0)
              .value();
      bitwise = bitwise && std::memcmp(base.data().data(), with.data().data(),
                                       base.size() * sizeof(double)) == 0;
    }
  }

  // Merged weights against the unmerged forward with random adapters.
  LoraStack stack = init_lora_stack(p.net, 4, 4, 1.0, 6);
  CounterRng r(6, Phase::kTest);
  for (ParamRef& ref : stack.refs()) *ref.value = r.normal_tensor(ref.value->shape(), 0.1);
  double merge_rel = 0.0;
  for (int n = 1; n <= 4; ++n) {
    AdapterSet set;
    for (int a = 1; a <= n; ++a) set.push_back(a);
    DenoiserParams merged = p;
    for (std::size_t j = 0; j < merged.net.layers.size(); ++j) {
      std::vector<LoraDelta> d;
      for (int a : set) {
        const LoraAdapter& ad = stack.adapters[static_cast<std::size_t>(a - 1)];
        d.push_back({&ad.down[j], &ad.up[j], ad.scale});
      }
      merged.net.layers[j].weight = merge_lora(p.net.layers[j].weight, d);
    }
    Tape tape;
    const Tensor adapted =
        denoise_eps(tape, p, Binding{false, &stack, set}, tape.constant_ref(x), 501, cond, 2.0)
            .value();
    Tape merged_tape;
    const Tensor folded =
        denoise_eps(merged_tape, merged, {}, merged_tape.constant_ref(x), 501, cond, 2.0).value();
    for (std::size_t i = 0; i < adapted.size(); ++i) {
      merge_rel = std::max(merge_rel,
                           std::abs(adapted[i] - folded[i]) / (std::abs(adapted[i]) + 1e-8));
    }
  }

  // Along every chain, used sets are prefixes {1..n} and never shrink.
  bool monotone = true;
  auto check_chain = [&](const ChainSpec& chain, bool skip_empty) {
    std::size_t last = 0;
    for (const ChainNode& node : chain.nodes) {
      if (node.kind != ChainNode::Kind::kTeacher) continue;
      if (!is_prefix_set(node.adapters)) monotone = false;
      if (skip_empty && node.adapters.empty()) continue;
      if (node.adapters.size() < last) monotone = false;
      last = node.adapters.size();
    }
  };
  for (InferenceActivation rule : {InferenceActivation::kSegment, InferenceActivation::kAssignedStepOnly}) {
    ChainOptions o;
    o.inference_rule = rule;
    check_chain(inference_chain(plan, o), rule == InferenceActivation::kAssignedStepOnly);
  }
  for (int stage = 1; stage <= 4; ++stage) check_chain(build_chain(plan, Strategy::kShortFT, stage), true);
  for (Strategy st : {Strategy::kVanilla, Strategy::kDraftK, Strategy::kStopGrad}) {
    check_chain(build_chain(plan, st, 1), true);
  }
  return {bitwise && merge_rel < 1e-5 && monotone,
          std::string("zero-init ") + (bitwise ? "bitwise equal" : "differs") +
              ", merge max rel " + fmt(merge_rel) + " (< 1e-5), activation sets " +
              (monotone ? "monotone" : "NOT monotone")};
}

// ---------------------------------------------------------------------------
// 5. Distillation fidelity

Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig config = task_config(TaskKind::kPoints2d);
  const Lab lab = load_lab(config, cached_task(TaskKind::kPoints2d), false, true);
  const StudentParams& student = *lab.student;

  // Mean per-coordinate variance of the data.
  const Tensor& d = lab.data.x;
  double var = 0.0;
  for (std::size_t c = 0; c < d.cols(); ++c) {
    double m = 0.0, q = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) m += d[i * d.cols() + c];
    m /= static_cast<double>(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) q += std::pow(d[i * d.cols() + c] - m, 2);
    var += q / static_cast<double>(d.rows());
  }
  var /= static_cast<double>(d.cols());

  const ProbeSet probes = make_probes(lab.base, lab.schedule, lab.plan, lab.data, 16,
                                      config.guidance_scale, 0xACCE55, Phase::kTest);
  const std::vector<double> seg = probe_mse(student, lab.schedule, lab.plan, probes);
  bool seg_ok = true;
  std::string seg_text;
  for (double m : seg) {
    seg_ok = seg_ok && m <= 0.05 * var;
    seg_text += fmt(m, 3) + " ";
  }

  // Composed jumps versus one-step x0 prediction, both against the teacher chain.
  const std::size_t n = 256;
  const Tensor xT = CounterRng(0xACCE55, Phase::kTest, 1).normal_tensor({n, 2});
  std::vector<int> cond(n);
  for (std::size_t i = 0; i < n; ++i) cond[i] = static_cast<int>(i % lab.data.num_classes);
  const std::vector<int>& steps = lab.schedule.step_list;
  bool wins = true;
  std::string mid_text;
  for (std::size_t idx = 5; idx < steps.size(); idx += 5) {
    const int t = steps[idx];
    const Tensor xt =
        teacher_subchain(lab.base, lab.schedule, xT, steps[0], t, cond, config.guidance_scale);
    const Tensor oracle = teacher_subchain(lab.base, lab.schedule, xt, t, 0, cond, config.guidance_scale);
    const double sc =
        mean_squared_diff(shortcut_to_zero(student, lab.schedule, lab.plan, xt, t, cond), oracle);
    const double one = mean_squared_diff(
        predict_x0_one_step(lab.base, xt, t, cond, lab.schedule, config.guidance_scale), oracle);
    wins = wins && sc < one;
    mid_text += " t=" + std::to_string(t) + ":" + fmt(sc, 2) + "<" + fmt(one, 2);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {seg_ok && wins,
          "segment MSE [" + seg_text + "] vs bound " + fmt(0.05 * var, 3) + " over " +
              std::to_string(probes.t_from.size()) + " probes; shortcut vs one-step (" +
              std::to_string(n) + " probes)" + mid_text + "; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 6. Graph size

Outcome criterion6() {
  const SegmentPlan plan = build_segment_plan(build_schedule(1000, ScheduleKind::kLinear, 50), 4);
  ChainOptions o;
  o.K = 1;
  const ChainSpec shortft = build_chain(plan, Strategy::kShortFT, 1, o);
  const ChainSpec vanilla = build_chain(plan, Strategy::kVanilla, 1, o);
  // Last K prefix steps, then one jump and one LoRA-timestep step per later segment.
  const std::size_t expected = static_cast<std::size_t>(o.K + 2 * (plan.k - 1));
  const std::size_t got = shortft.grad_enabled_count();
  const std::size_t full = vanilla.grad_enabled_count();
  return {got == expected && got <= 8 && full == 50,
          "shortft stage 1 " + std::to_string(got) + " (expected " + std::to_string(expected) +
              ", <= 8), vanilla " + std::to_string(full) + " (expected 50)"};
}

// ---------------------------------------------------------------------------
// 7. End-to-end alignment

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string text;
  for (TaskKind task : {TaskKind::kBars16, TaskKind::kPoints2d}) {
    const ExperimentConfig config = task_config(task);
    const Lab lab = load_lab(config, cached_task(task), needs_critic(config), true);
    const double base = eval_mean(lab, nullptr, AdapterLayout::kShared);
    text += task_dir_name(task) + " base " + fmt(base) + " tuned";
    for (std::uint64_t seed : kSeeds) {
      StrategyConfig sc = config.finetune;
      sc.seed = seed;
      const double tuned = tuned_mean(lab, sc);
      // bars16 reward is the negated symmetry penalty.
      const bool pass = task == TaskKind::kBars16 ? -tuned <= 0.5 * -base : tuned > base;
      ok = ok && pass;
      text += " " + fmt(tuned) + (pass ? "" : "(x)");
      note(task_dir_name(task) + " seed " + std::to_string(seed) + ": " + fmt(tuned));
    }
    text += "; ";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ok, text + "bars16 needs penalty <= 50% of base, points2d strict increase; " +
                  fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 8. Strategy ordering under equal wall-clock

std::map<std::string, double> read_compare(const fs::path& csv) {
  std::ifstream f(csv);
  std::string line;
  std::getline(f, line);
  std::map<std::string, double> out;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() >= 9) out[cells[0]] = std::stod(cells[7]);
  }
  return out;
}

Outcome criterion8(double budget) {
  bool ok = true;
  std::string text;
  CsvTable log(cache_root / "criterion8.csv",
               {"task", "seed", "strategy", "eval_mean", "budget_seconds"});
  for (TaskKind task : {TaskKind::kBars16, TaskKind::kPoints2d}) {
    int vs_stopgrad = 0, vs_draft = 0;
    for (std::uint64_t seed : kSeeds) {
      ExperimentConfig config = task_config(task);
      apply_overrides(config, {{"experiment.seed", std::to_string(seed)},
                               {"compare.budget_seconds", format_double(budget)}});
      const fs::path dir = workspace(task, "compare_seed" + std::to_string(seed));
      cmd_compare(config, RunOptions{dir, true, quiet});
      const std::map<std::string, double> r = read_compare(dir / "compare.csv");
      for (const auto& [name, v] : r) {
        log.add({task_dir_name(task), std::to_string(seed), name, format_double(v),
                 format_double(budget)});
      }
      log.flush();
      vs_stopgrad += r.at("shortft") >= r.at("stopgrad");
      vs_draft += r.at("shortft") >= r.at("draft-k");
      note(task_dir_name(task) + " seed " + std::to_string(seed) + ": shortft " +
           fmt(r.at("shortft")) + " stopgrad " + fmt(r.at("stopgrad")) + " draft-k " +
           fmt(r.at("draft-k")));
    }
    ok = ok && vs_stopgrad >= 2 && vs_draft >= 2;
    text += task_dir_name(task) + ": shortft >= stopgrad " + std::to_string(vs_stopgrad) +
            "/3, >= draft-k " + std::to_string(vs_draft) + "/3; ";
  }
  return {ok, text + "budget " + fmt(budget) + " s per strategy, raw numbers in " +
                  (cache_root / "criterion8.csv").string()};
}

// ---------------------------------------------------------------------------
// 9. Ablation directions

Outcome criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig config = task_config(TaskKind::kBars16);
  const Lab lab = load_lab(config, cached_task(TaskKind::kBars16), needs_critic(config), true);
  int vs_shared = 0, vs_single = 0;
  std::string text;
  for (std::uint64_t seed : kSeeds) {
    StrategyConfig full = config.finetune;
    full.seed = seed;
    StrategyConfig shared = full;
    shared.chain.layout = AdapterLayout::kShared;
    StrategyConfig single = full;
    single.progressive = false;
    const double a = tuned_mean(lab, full);
    const double b = tuned_mean(lab, shared);
    const double c = tuned_mean(lab, single);
    vs_shared += a >= b;
    vs_single += a >= c;
    text += " seed " + std::to_string(seed) + ": " + fmt(a) + "/" + fmt(b) + "/" + fmt(c) + ";";
    note("seed " + std::to_string(seed) + ": full " + fmt(a) + " shared " + fmt(b) +
         " stage-k only " + fmt(c));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {vs_shared >= 2 && vs_single >= 2,
          "bars16 full/shared/stage-k-only" + text + " full >= shared " +
              std::to_string(vs_shared) + "/3, full >= stage-k-only " + std::to_string(vs_single) +
              "/3; " + fmt(secs, 3) + " s"};
}

// ---------------------------------------------------------------------------
// 10. Reproducibility

Outcome criterion10() {
  const ExperimentConfig config = task_config(TaskKind::kPoints2d);
  const fs::path cached = workspace(TaskKind::kPoints2d, "repro_cached");
  const fs::path fresh = cache_root / "runs" / "points2d_repro_fresh";
  fs::remove_all(fresh);
  cmd_train_base(config, RunOptions{fresh, true, quiet});
  cmd_distill(config, RunOptions{fresh, true, quiet});
  const bool models_same = file_sha256(fresh / kBlobName) == file_sha256(cached / kBlobName);
  cmd_finetune(config, RunOptions{fresh, true, quiet});
  cmd_finetune(config, RunOptions{cached, true, quiet});
  const std::string a = file_sha256(fresh / "metrics.csv");
  const std::string b = file_sha256(cached / "metrics.csv");
  return {models_same && a == b, std::string("trained models ") +
                                     (models_same ? "identical" : "differ") + ", metrics.csv " +
                                     a.substr(0, 16) + (a == b ? " == " : " != ") +
                                     b.substr(0, 16)};
}

Outcome run(int n, double budget) {
  switch (n) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8(budget);
    case 9: return criterion9();
    case 10: return criterion10();
    default: return {false, "unknown criterion"};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> criteria;
  std::string cache = "acceptance_cache";
  double budget = 120.0;
  app.add_option("--criterion,-c", criteria, "criteria to run (default: all)")
      ->check(CLI::Range(1, 10));
  app.add_option("--cache", cache, "directory for shared trained models");
  app.add_option("--budget-seconds", budget, "per-strategy budget for criterion 8");
  app.add_flag("--quiet,-q", quiet, "suppress progress output");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) {
    for (int i = 1; i <= 10; ++i) criteria.push_back(i);
  }
  cache_root = fs::absolute(cache);
  fs::create_directories(cache_root / "runs");

  int failures = 0;
  for (int n : criteria) {
    Outcome o;
    try {
      o = run(n, budget);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << n << ": " << o.detail
              << std::endl;
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
