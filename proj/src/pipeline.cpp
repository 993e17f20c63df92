// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "shortft/gradcheck.hpp"
#include "shortft/harness.hpp"
#include "shortft/rng.hpp"

namespace shortft {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Base model

namespace {

struct NoiseBatch {
  Tensor x_t;
  Tensor noise;
  std::vector<int> t;
  std::vector<int> classes;
};

NoiseBatch draw_noise_batch(const Dataset& data, const NoiseSchedule& schedule, std::size_t batch,
                            double dropout, CounterRng& rng) {
  const std::size_t d = data.dim();
  NoiseBatch b;
  b.x_t = Tensor({batch, d});
  b.noise = rng.normal_tensor({batch, d});
  b.t.resize(batch);
  b.classes.resize(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    const std::size_t i = rng.below(data.size());
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(schedule.T)));
    const double ab = schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double keep = std::sqrt(ab), mix = std::sqrt(1.0 - ab);
    for (std::size_t q = 0; q < d; ++q) {
      b.x_t.at(r, q) = keep * data.x.at(i, q) + mix * b.noise.at(r, q);
    }
    b.t[r] = t;
    b.classes[r] = rng.uniform() < dropout ? kNullClass : data.labels[i];
  }
  return b;
}

Var noise_loss(Tape& tape, const DenoiserParams& params, const NoiseBatch& b, bool trainable) {
  Var eps = denoiser_forward(tape, params, Binding{trainable, nullptr, {}},
                             tape.constant_ref(b.x_t), b.t, b.classes);
  return mean(square(eps - tape.constant_ref(b.noise)));
}

double eval_loss(const DenoiserParams& params, const NoiseBatch& b) {
  Tape tape;
  NoGradGuard guard(tape);
  return noise_loss(tape, params, b, false).value().item();
}

}  // namespace

BaseTrainResult train_base(const Dataset& data, const MlpConfig& model,
                           const NoiseSchedule& schedule, const BaseTrainConfig& config,
                           std::uint64_t seed, bool gaussian_skip) {
  BaseTrainResult result;
  result.params = gaussian_skip ? init_denoiser(model, schedule, seed)
                                : init_denoiser(model, schedule.T, seed);
  DenoiserParams& params = result.params;
  round_to_storage(params.net.refs());
  CounterRng eval_rng(seed, Phase::kBaseTrain, 0, 1);
  const NoiseBatch eval_batch =
      draw_noise_batch(data, schedule, config.eval_batch, config.cond_dropout, eval_rng);
  result.initial_loss = eval_loss(params, eval_batch);

  const std::vector<ParamRef> refs = params.net.refs();
  std::vector<GradRequest> requests;
  for (const ParamRef& r : refs) requests.push_back({r.id, r.value->shape()});
  AdamW opt(AdamWConfig{config.lr, 0.9, 0.999, 1e-8, 0.0});
  double window = 0.0;
  std::size_t in_window = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    CounterRng rng(seed, Phase::kBaseTrain, step + 1);
    const NoiseBatch b = draw_noise_batch(data, schedule, config.batch, config.cond_dropout, rng);
    Tape tape;
    Var loss = noise_loss(tape, params, b, true);
    const double v = loss.value().item();
    if (!std::isfinite(v)) throw PipelineError("train-base: loss diverged at step " + std::to_string(step));
    opt.set_lr(cosine_lr(config.lr, step, config.steps, 0.05));
    opt.step(refs, tape.backward(loss, requests));
    window += v;
    ++in_window;
    if ((config.log_every > 0 && in_window == config.log_every) || step + 1 == config.steps) {
      result.loss_curve.emplace_back(step + 1, window / static_cast<double>(in_window));
      window = 0.0;
      in_window = 0;
    }
  }
  round_to_storage(params.net.refs());
  result.final_loss = eval_loss(params, eval_batch);
  return result;
}

// ---------------------------------------------------------------------------
// Lab

ChainModels Lab::models(const LoraStack* stack) const {
  ChainModels m;
  m.teacher = &base;
  m.stack = stack;
  m.student = student ? &*student : nullptr;
  m.schedule = &schedule;
  m.plan = &plan;
  m.guidance_scale = config.guidance_scale;
  return m;
}

RewardContext Lab::reward_context() const { return RewardContext{critic ? &*critic : nullptr}; }

Lab make_lab(const ExperimentConfig& config) {
  Lab lab;
  lab.config = config;
  lab.schedule = build_schedule(config.T, config.schedule, config.steps);
  lab.plan = build_segment_plan(lab.schedule, config.k);
  lab.data = generate_dataset(config.task, config.base.dataset_size, config.model_seed);
  lab.base = config.gaussian_skip ? init_denoiser(config.denoiser, lab.schedule, config.model_seed)
                                  : init_denoiser(config.denoiser, config.T, config.model_seed);
  return lab;
}

BasePhaseReport run_base_phase(Lab& lab) {
  BasePhaseReport report;
  report.base = train_base(lab.data, lab.config.denoiser, lab.schedule, lab.config.base,
                           lab.config.model_seed, lab.config.gaussian_skip);
  lab.base = report.base.params;
  lab.base_loss = report.base.final_loss;
  const Dataset critic_data =
      generate_dataset(lab.config.task, lab.config.critic.train_size, lab.config.model_seed + 1);
  CriticParams critic = train_critic(critic_data, lab.config.critic, &report.critic);
  round_to_storage(critic.net.refs());
  lab.critic = std::move(critic);
  return report;
}

DistillReport run_distill_phase(Lab& lab) {
  DistillResult r = distill_student(lab.base, lab.schedule, lab.plan, lab.data, lab.config.student,
                                    lab.config.distill, lab.base_loss);
  round_to_storage(r.student.net.refs());
  lab.student = std::move(r.student);
  return r.report;
}

FinetuneResult run_finetune_phase(const Lab& lab, const StrategyConfig& strategy,
                                  const MetricsSink& sink) {
  LoraStack stack = init_lora_stack(lab.base.net, adapter_count(strategy, lab.plan.k),
                                    lab.config.lora_rank, lab.config.lora_scale, strategy.seed);
  return finetune(lab.models(nullptr), std::move(stack), lab.config.reward, lab.reward_context(),
                  strategy, lab.data.num_classes, sink);
}

std::vector<RewardSpec> eval_rewards(const ExperimentConfig& config) {
  return config.eval.rewards.empty() ? std::vector<RewardSpec>{config.reward}
                                     : config.eval.rewards;
}

std::vector<RewardSummary> evaluate(const Lab& lab, const LoraStack* stack, AdapterLayout layout,
                                    const std::vector<RewardSpec>& rewards, std::size_t n,
                                    std::uint64_t seed) {
  std::vector<RewardSummary> out;
  if (n == 0) return out;
  CounterRng rng(seed, Phase::kEval);
  const Tensor x_T = rng.normal_tensor({n, lab.data.dim()});
  std::vector<int> cond(n);
  for (std::size_t i = 0; i < n; ++i) cond[i] = static_cast<int>(i % lab.data.num_classes);
  const Tensor x0 = sample(lab.base, stack, lab.plan, layout, lab.config.finetune.chain.inference_rule,
                           cond, x_T, lab.schedule, lab.config.guidance_scale, 0.0, seed);
  for (const RewardSpec& spec : rewards) {
    const std::vector<double> v = reward_per_sample(spec, lab.reward_context(), x0, cond);
    double mean = 0.0;
    for (double r : v) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : v) var += (r - mean) * (r - mean);
    out.push_back({spec.to_string(), mean, std::sqrt(var / static_cast<double>(n)), n});
  }
  return out;
}

double objective_gradcheck(const Lab& lab, LoraStack& stack, const RewardSpec& reward,
                           std::size_t coords, std::uint64_t seed,
                           std::vector<GradcheckRow>* rows) {
  ChainOptions options = lab.config.finetune.chain;
  options.K = static_cast<int>(lab.schedule.step_list.size());  // no truncation
  options.layout = stack.size() > 1 ? AdapterLayout::kTimestepAware : AdapterLayout::kShared;
  const ChainSpec chain = build_chain(lab.plan, Strategy::kShortFT, 1, options);
  stack.trainable.assign(stack.size(), false);
  stack.trainable[0] = true;

  const std::size_t batch = 4;
  CounterRng rng(seed, Phase::kGradcheck);
  const Tensor x_T = rng.normal_tensor({batch, lab.data.dim()});
  std::vector<int> cond(batch);
  for (std::size_t i = 0; i < batch; ++i) cond[i] = static_cast<int>(i % lab.data.num_classes);

  ChainModels models = lab.models(&stack);
  const RewardContext ctx = lab.reward_context();
  const Objective at = reward_objective(models, chain, reward, ctx, x_T, cond);

  // Coordinates of adapter 1 in refs() order.
  std::vector<std::pair<Tensor*, std::size_t>> flat;
  std::vector<std::pair<std::string, std::size_t>> names;
  std::vector<double> analytic;
  for (const ParamRef& r : stack.refs()) {
    auto g = at.grads.find(r.id);
    if (g == at.grads.end()) continue;
    for (std::size_t i = 0; i < r.value->size(); ++i) {
      flat.emplace_back(r.value, i);
      names.emplace_back(r.name, i);
      analytic.push_back(g->second[i]);
    }
  }
  if (flat.empty()) throw PipelineError("gradcheck: no trainable coordinates");

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t c = 0; c < coords; ++c) {
    const std::size_t pick = rng.below(flat.size());
    auto [tensor, idx] = flat[pick];
    const double saved = (*tensor)[idx];
    (*tensor)[idx] = saved + h;
    const double up = reward_objective(models, chain, reward, ctx, x_T, cond).J;
    (*tensor)[idx] = saved - h;
    const double down = reward_objective(models, chain, reward, ctx, x_T, cond).J;
    (*tensor)[idx] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[pick] - numeric) / (std::abs(numeric) + 1e-8);
    worst = std::max(worst, rel);
    if (rows) rows->push_back({names[pick].first, names[pick].second, analytic[pick], numeric, rel});
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Artifact directories

namespace {

void say(const RunOptions& opts, const std::string& msg) {
  if (!opts.quiet) std::cerr << msg << '\n';
}

std::map<std::string, std::string> identity_meta(const ExperimentConfig& c) {
  return {{"task", std::string(task_name(c.task))},
          {"T", std::to_string(c.T)},
          {"schedule", std::string(schedule_kind_name(c.schedule))},
          {"steps", std::to_string(c.steps)},
          {"k", std::to_string(c.k)},
          {"model_seed", std::to_string(c.model_seed)},
          {"denoiser", std::to_string(c.denoiser.hidden) + "x" + std::to_string(c.denoiser.depth) +
                           "/t" + std::to_string(c.denoiser.time_dim) + "/c" +
                           std::to_string(c.denoiser.class_dim)},
          {"student", std::to_string(c.student.hidden) + "x" + std::to_string(c.student.depth) +
                          "/t" + std::to_string(c.student.time_dim) + "/c" +
                          std::to_string(c.student.class_dim)},
          {"guidance_scale", format_double(c.guidance_scale)},
          {"gaussian_skip", c.gaussian_skip ? "true" : "false"}};
}

void check_identity(const Checkpoint& ckpt, const ExperimentConfig& c) {
  for (const auto& [k, v] : identity_meta(c)) {
    auto it = ckpt.meta.find(k);
    if (it == ckpt.meta.end() || it->second != v) {
      throw PipelineError("checkpoint was produced with " + k + " = " +
                          (it == ckpt.meta.end() ? std::string("<unset>") : it->second) +
                          ", config has " + v);
    }
  }
}

Checkpoint without_prefixes(const Checkpoint& ckpt, std::initializer_list<const char*> prefixes) {
  Checkpoint out;
  out.meta = ckpt.meta;
  for (const auto& [name, t] : ckpt.tensors) {
    bool drop = false;
    for (const char* p : prefixes) drop = drop || name.rfind(p, 0) == 0;
    if (!drop) out.tensors.emplace_back(name, t);
  }
  return out;
}

bool has_checkpoint(const fs::path& dir) { return fs::exists(dir / kManifestName); }

void refuse_existing(const fs::path& path, bool force, const std::string& what) {
  if (fs::exists(path) && !force) {
    throw PipelineError(what + " already exists in " + path.parent_path().string() +
                        "; pass --force to overwrite");
  }
}

LoraStack load_stack(const Lab& lab, const Checkpoint& ckpt) {
  const auto count = static_cast<std::size_t>(std::stoul(ckpt.meta.at("lora_count")));
  LoraStack stack = init_lora_stack(lab.base.net, count, lab.config.lora_rank, lab.config.lora_scale, 0);
  get_params(ckpt, "lora.", stack.refs());
  stack.trainable.assign(count, false);
  return stack;
}

}  // namespace

Lab load_lab(const ExperimentConfig& config, const fs::path& dir, bool need_critic,
             bool need_student) {
  if (!has_checkpoint(dir)) {
    throw PipelineError("missing phase train-base: no checkpoint in " + dir.string() +
                        " (run `shortft train-base` first)");
  }
  const Checkpoint ckpt = load_checkpoint(dir);
  if (!ckpt.has_prefix("base.")) {
    throw PipelineError("missing phase train-base: checkpoint has no base model");
  }
  check_identity(ckpt, config);
  Lab lab = make_lab(config);
  get_params(ckpt, "base.", lab.base.net.refs());
  lab.base_loss = std::stod(ckpt.meta.at("base_final_loss"));
  if (ckpt.has_prefix("critic.")) {
    CriticParams critic = init_critic(lab.data.dim(), lab.data.num_classes, config.critic);
    get_params(ckpt, "critic.", critic.net.refs());
    lab.critic = std::move(critic);
  } else if (need_critic) {
    throw PipelineError("missing phase train-base: checkpoint has no critic");
  }
  if (ckpt.has_prefix("student.")) {
    StudentParams s = init_student(config.student, config.T, config.guidance_scale, config.model_seed);
    get_params(ckpt, "student.", s.net.refs());
    lab.student = std::move(s);
  } else if (need_student) {
    throw PipelineError("missing phase distill: checkpoint has no student (run `shortft distill` first)");
  }
  return lab;
}

void cmd_train_base(const ExperimentConfig& config, const RunOptions& opts) {
  if (has_checkpoint(opts.out) && !opts.force) {
    throw PipelineError("checkpoint already exists in " + opts.out.string() +
                        "; pass --force to overwrite");
  }
  fs::create_directories(opts.out);
  {
    std::ofstream f(opts.out / "config.ini");
    f << config_to_text(config);
  }
  Lab lab = make_lab(config);
  say(opts, "train-base: " + std::to_string(config.base.steps) + " steps on " +
                std::string(task_name(config.task)));
  const BasePhaseReport report = run_base_phase(lab);
  {
    CsvTable curve(opts.out / "base.csv", {"step", "loss"});
    for (const auto& [step, loss] : report.base.loss_curve) {
      curve.add({std::to_string(step), format_double(loss)});
    }
  }
  Checkpoint ckpt;
  ckpt.meta = identity_meta(config);
  ckpt.meta["base_initial_loss"] = format_double(report.base.initial_loss);
  ckpt.meta["base_final_loss"] = format_double(report.base.final_loss);
  ckpt.meta["critic_accuracy"] = format_double(report.critic.heldout_accuracy);
  put_params(ckpt, "base.", lab.base.net.refs());
  put_params(ckpt, "critic.", lab.critic->net.refs());
  save_checkpoint(opts.out, ckpt);
  say(opts, "train-base: loss " + format_double(report.base.initial_loss) + " -> " +
                format_double(report.base.final_loss) + ", critic accuracy " +
                format_double(report.critic.heldout_accuracy));
}

void cmd_distill(const ExperimentConfig& config, const RunOptions& opts) {
  Lab lab = load_lab(config, opts.out, false, false);
  const Checkpoint prior = load_checkpoint(opts.out);
  if (prior.has_prefix("student.") && !opts.force) {
    throw PipelineError("student already distilled in " + opts.out.string() +
                        "; pass --force to overwrite");
  }
  say(opts, "distill: " + std::to_string(config.distill.steps) + " steps");
  const DistillReport report = run_distill_phase(lab);
  {
    std::vector<std::string> header{"epoch", "loss"};
    for (int j = 1; j <= config.k; ++j) header.push_back("heldout_mse_seg" + std::to_string(j));
    CsvTable table(opts.out / "distill.csv", header);
    for (const DistillEpoch& e : report.epochs) {
      std::vector<std::string> row{std::to_string(e.epoch), format_double(e.loss)};
      for (double m : e.heldout_mse) row.push_back(format_double(m));
      table.add(std::move(row));
    }
  }
  for (const std::string& w : report.warnings) say(opts, "distill: warning: " + w);
  Checkpoint ckpt = without_prefixes(prior, {"student.", "lora."});
  ckpt.meta.erase("lora_count");
  ckpt.meta["distill_probes"] = std::to_string(report.probe_count);
  put_params(ckpt, "student.", lab.student->net.refs());
  save_checkpoint(opts.out, ckpt);
}

void cmd_finetune(const ExperimentConfig& config, const RunOptions& opts) {
  const bool shortft = config.finetune.strategy == Strategy::kShortFT;
  const bool critic = config.reward.kind == RewardKind::kCritic ||
                      config.reward.kind == RewardKind::kCombined;
  Lab lab = load_lab(config, opts.out, critic, shortft);
  const Checkpoint prior = load_checkpoint(opts.out);
  refuse_existing(opts.out / "metrics.csv", opts.force, "metrics.csv");
  if (prior.has_prefix("lora.") && !opts.force) {
    throw PipelineError("fine-tuned adapters already exist in " + opts.out.string() +
                        "; pass --force to overwrite");
  }
  CsvTable metrics(opts.out / "metrics.csv",
                   {"step", "stage", "strategy", "J", "grad_norm", "nodes_grad_enabled",
                    "explosion_events"},
                   50);
  CsvTable timing(opts.out / "timing.csv", {"step", "wallclock_ms"}, 50);
  say(opts, "finetune: " + std::string(strategy_name(config.finetune.strategy)) + ", reward " +
                config.reward.to_string());
  const FinetuneResult result = run_finetune_phase(lab, config.finetune, [&](const MetricsRow& r) {
    metrics.add({std::to_string(r.step), std::to_string(r.stage), r.strategy, format_double(r.J),
                 format_double(r.grad_norm), std::to_string(r.nodes_grad_enabled),
                 std::to_string(r.explosion_events)});
    timing.add({std::to_string(r.step), format_double(std::round(r.wallclock_ms))});
  });
  metrics.flush();
  timing.flush();
  Checkpoint ckpt = without_prefixes(prior, {"lora."});
  LoraStack stack = result.stack;
  round_to_storage(stack.refs());
  ckpt.meta["lora_count"] = std::to_string(stack.size());
  ckpt.meta["lora_layout"] = std::string(adapter_layout_name(
      stack.size() > 1 ? AdapterLayout::kTimestepAware : AdapterLayout::kShared));
  ckpt.meta["finetune_strategy"] = std::string(strategy_name(config.finetune.strategy));
  ckpt.meta["finetune_seed"] = std::to_string(config.seed);
  put_params(ckpt, "lora.", stack.refs());
  save_checkpoint(opts.out, ckpt);
  say(opts, "finetune: " + std::to_string(result.rows.size()) + " steps, " +
                std::to_string(result.explosion_events) + " explosion events");
}

std::vector<RewardSummary> cmd_eval(const ExperimentConfig& config, const RunOptions& opts) {
  const std::vector<RewardSpec> rewards = eval_rewards(config);
  bool critic = false;
  for (const RewardSpec& r : rewards) {
    critic = critic || r.kind == RewardKind::kCritic || r.kind == RewardKind::kCombined;
  }
  const Lab lab = load_lab(config, opts.out, critic, false);
  refuse_existing(opts.out / "eval.csv", opts.force, "eval.csv");
  const Checkpoint ckpt = load_checkpoint(opts.out);
  CsvTable table(opts.out / "eval.csv", {"model", "reward", "mean", "std", "n"});
  std::vector<RewardSummary> all;
  auto emit = [&](const std::string& model, const std::vector<RewardSummary>& rows) {
    for (const RewardSummary& s : rows) {
      table.add({model, s.reward, format_double(s.mean), format_double(s.stddev),
                 std::to_string(s.n)});
      say(opts, "eval: " + model + " " + s.reward + " mean " + format_double(s.mean) + " std " +
                    format_double(s.stddev));
      all.push_back(s);
    }
  };
  emit("base", evaluate(lab, nullptr, AdapterLayout::kShared, rewards, config.eval.n, config.eval.seed));
  if (ckpt.has_prefix("lora.")) {
    const LoraStack stack = load_stack(lab, ckpt);
    const AdapterLayout layout =
        stack.size() > 1 ? AdapterLayout::kTimestepAware : AdapterLayout::kShared;
    emit("tuned", evaluate(lab, &stack, layout, rewards, config.eval.n, config.eval.seed));
  }
  table.flush();
  return all;
}

double cmd_gradcheck(const ExperimentConfig& config, const RunOptions& opts) {
  // Trained models when the directory has them, fresh ones otherwise: the
  // check concerns the gradient path, not model quality.
  Lab lab = has_checkpoint(opts.out) ? load_lab(config, opts.out, false, false) : make_lab(config);
  if (!lab.critic) lab.critic = init_critic(lab.data.dim(), lab.data.num_classes, config.critic);
  if (!lab.student) {
    lab.student = init_student(config.student, config.T, config.guidance_scale, config.model_seed);
  }
  StrategyConfig sc = config.finetune;
  sc.strategy = Strategy::kShortFT;
  LoraStack stack = init_lora_stack(lab.base.net, adapter_count(sc, config.k), config.lora_rank,
                                    config.lora_scale, config.seed);
  CounterRng rng(config.seed, Phase::kGradcheck, 1);
  for (const ParamRef& r : stack.refs()) *r.value = rng.normal_tensor(r.value->shape(), 0.05);
  std::vector<GradcheckRow> rows;
  const double worst = objective_gradcheck(lab, stack, config.reward, 10, config.seed, &rows);
  fs::create_directories(opts.out);
  CsvTable table(opts.out / "gradcheck.csv", {"param", "index", "analytic", "numeric", "rel_error"});
  for (const GradcheckRow& r : rows) {
    table.add({r.param, std::to_string(r.index), format_double(r.analytic), format_double(r.numeric),
               format_double(r.rel_error)});
  }
  say(opts, "gradcheck: max relative error " + format_double(worst));
  return worst;
}

void cmd_compare(const ExperimentConfig& config, const RunOptions& opts) {
  const bool critic = config.reward.kind == RewardKind::kCritic ||
                      config.reward.kind == RewardKind::kCombined;
  bool shortft = false;
  for (Strategy s : config.compare.strategies) shortft = shortft || s == Strategy::kShortFT;
  const Lab lab = load_lab(config, opts.out, critic, shortft);
  refuse_existing(opts.out / "compare.csv", opts.force, "compare.csv");
  CsvTable table(opts.out / "compare.csv",
                 {"strategy", "seed", "budget_seconds", "seconds", "steps", "explosion_events",
                  "reward", "eval_mean", "eval_std"});
  CsvTable raw(opts.out / "compare_metrics.csv",
               {"strategy", "step", "stage", "J", "grad_norm", "nodes_grad_enabled",
                "wallclock_ms", "explosion_events"},
               200);
  const RewardSpec& target = config.reward;
  const RewardSummary base =
      evaluate(lab, nullptr, AdapterLayout::kShared, {target}, config.eval.n, config.eval.seed)
          .at(0);
  table.add({"base", std::to_string(config.seed), "0", "0", "0", "0", base.reward,
             format_double(base.mean), format_double(base.stddev)});
  for (Strategy s : config.compare.strategies) {
    StrategyConfig sc = config.finetune;
    sc.strategy = s;
    sc.budget_seconds = config.compare.budget_seconds;
    say(opts, "compare: " + std::string(strategy_name(s)) + " for " +
                  format_double(sc.budget_seconds) + " s");
    const FinetuneResult r = run_finetune_phase(lab, sc, [&](const MetricsRow& m) {
      raw.add({m.strategy, std::to_string(m.step), std::to_string(m.stage), format_double(m.J),
               format_double(m.grad_norm), std::to_string(m.nodes_grad_enabled),
               format_double(std::round(m.wallclock_ms)), std::to_string(m.explosion_events)});
    });
    const AdapterLayout layout =
        r.stack.size() > 1 ? AdapterLayout::kTimestepAware : AdapterLayout::kShared;
    const RewardSummary e =
        evaluate(lab, &r.stack, layout, {target}, config.eval.n, config.eval.seed).at(0);
    table.add({std::string(strategy_name(s)), std::to_string(config.seed),
               format_double(sc.budget_seconds), format_double(r.seconds),
               std::to_string(r.rows.size()), std::to_string(r.explosion_events), e.reward,
               format_double(e.mean), format_double(e.stddev)});
    table.flush();
    say(opts, "compare: " + std::string(strategy_name(s)) + " eval " + format_double(e.mean) +
                  " after " + std::to_string(r.rows.size()) + " steps");
  }
}

}  // namespace shortft
