// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shortft/align.hpp"
#include "shortft/dataset.hpp"
#include "shortft/diffusion.hpp"
#include "shortft/models.hpp"
#include "shortft/rewards.hpp"
#include "shortft/shortcut.hpp"

namespace shortft {

// ---------------------------------------------------------------------------
// Configuration

struct BaseTrainConfig {
  std::size_t steps = 20000;
  std::size_t batch = 256;
  std::size_t dataset_size = 20000;
  double lr = 1e-3;
  double cond_dropout = 0.1;
  std::size_t log_every = 100;
  std::size_t eval_batch = 2048;  // fixed batch scoring initial and final loss
};

struct EvalConfig {
  std::size_t n = 256;
  std::uint64_t seed = 777;
  std::vector<RewardSpec> rewards;  // empty → the fine-tuning reward
};

struct CompareConfig {
  double budget_seconds = 120.0;
  std::vector<Strategy> strategies{Strategy::kShortFT, Strategy::kStopGrad, Strategy::kDraftK};
};

struct ExperimentConfig {
  TaskKind task = TaskKind::kPoints2d;
  std::uint64_t seed = 0;        // fine-tuning and comparison runs
  std::uint64_t model_seed = 0;  // base model, critic, student
  int T = 1000;
  ScheduleKind schedule = ScheduleKind::kLinear;
  int steps = 50;
  double guidance_scale = 2.0;
  int k = 4;
  MlpConfig denoiser;
  bool gaussian_skip = false;  // see DenoiserParams::skip_gain
  MlpConfig student;
  BaseTrainConfig base;
  CriticConfig critic;
  DistillConfig distill;
  std::size_t lora_rank = 4;
  double lora_scale = 1.0;
  StrategyConfig finetune;
  RewardSpec reward;
  EvalConfig eval;
  CompareConfig compare;

  /// Defaults for a task before any file overrides.
  static ExperimentConfig defaults(TaskKind task);
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the INI grammar in docs/config.md. Unknown sections or keys are
/// errors. SHORTFT_SEED, when set, overrides [experiment] seed.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string config_to_text(const ExperimentConfig& config);
/// Sets "section.key" fields as the file parser would, then re-derives the
/// dependent fields. Later entries win.
void apply_overrides(ExperimentConfig& config,
                     const std::vector<std::pair<std::string, std::string>>& overrides);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  bool has_prefix(const std::string& prefix) const;
  const Tensor* find(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestName = "checkpoint.manifest";
inline constexpr const char* kBlobName = "checkpoint.blob";

/// Little-endian float32 blob in manifest order plus a text manifest holding
/// the SHA-256 of the blob.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
/// Verifies the hash; throws CheckpointError on mismatch or malformed input.
Checkpoint load_checkpoint(const std::filesystem::path& dir);
std::vector<unsigned char> encode_blob(const Checkpoint& ckpt);
std::string sha256_hex(const void* data, std::size_t size);
std::string file_sha256(const std::filesystem::path& path);

/// Rounds every value to float32 precision, the stored precision.
void round_to_storage(std::vector<ParamRef> refs);

void put_params(Checkpoint& ckpt, const std::string& prefix, std::vector<ParamRef> refs);
/// Copies tensors named prefix + ref.name into the refs, checking shapes.
void get_params(const Checkpoint& ckpt, const std::string& prefix, std::vector<ParamRef> refs);

// ---------------------------------------------------------------------------
// CSV

/// Buffered table written atomically (temp file + rename) on every flush, so
/// readers never see a partial row.
class CsvTable {
 public:
  CsvTable(std::filesystem::path path, std::vector<std::string> header,
           std::size_t flush_every = 0);
  ~CsvTable();
  CsvTable(const CsvTable&) = delete;
  CsvTable& operator=(const CsvTable&) = delete;

  void add(std::vector<std::string> row);
  void flush();
  std::size_t rows() const noexcept { return rows_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::size_t flush_every_;
  std::size_t unflushed_ = 0;
};

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Pipeline phases (in-process)

struct BaseTrainResult {
  DenoiserParams params;
  std::vector<std::pair<std::size_t, double>> loss_curve;  // (step, mean loss)
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

BaseTrainResult train_base(const Dataset& data, const MlpConfig& model, const NoiseSchedule& schedule,
                           const BaseTrainConfig& config, std::uint64_t seed,
                           bool gaussian_skip = false);

/// Shared state of one experiment: schedule, plan, data and frozen models.
struct Lab {
  ExperimentConfig config;
  NoiseSchedule schedule;
  SegmentPlan plan;
  Dataset data;
  DenoiserParams base;
  double base_loss = 0.0;
  std::optional<CriticParams> critic;
  std::optional<StudentParams> student;

  ChainModels models(const LoraStack* stack) const;
  RewardContext reward_context() const;
};

/// Schedule, plan and dataset for a config; no models yet.
Lab make_lab(const ExperimentConfig& config);

struct BasePhaseReport {
  BaseTrainResult base;
  CriticReport critic;
};
BasePhaseReport run_base_phase(Lab& lab);
DistillReport run_distill_phase(Lab& lab);

/// Fine-tunes a fresh stack; strategy settings come from `strategy`.
FinetuneResult run_finetune_phase(const Lab& lab, const StrategyConfig& strategy,
                                  const MetricsSink& sink = {});

struct RewardSummary {
  std::string reward;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Per-reward mean/std over n seeded eta = 0 chains on the full original chain
/// with inference-mode adapter activation. Conditions alternate over classes.
std::vector<RewardSummary> evaluate(const Lab& lab, const LoraStack* stack, AdapterLayout layout,
                                    const std::vector<RewardSpec>& rewards, std::size_t n,
                                    std::uint64_t seed);

/// Eval rewards configured for the lab (falls back to the fine-tuning reward).
std::vector<RewardSpec> eval_rewards(const ExperimentConfig& config);

struct GradcheckRow {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// Central-difference check of the untruncated stage-1 ShortFT reward
/// objective (gradients on the whole retained prefix) at
/// `coords` random coordinates of the trainable adapter. `stack` must hold
/// adapter_count(kShortFT, k) adapters; the lab needs a student (and a critic
/// for critic rewards). Returns the max relative error.
double objective_gradcheck(const Lab& lab, LoraStack& stack, const RewardSpec& reward,
                           std::size_t coords, std::uint64_t seed,
                           std::vector<GradcheckRow>* rows = nullptr);

// ---------------------------------------------------------------------------
// Artifact directories (CLI surface)

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::filesystem::path out;
  bool force = false;
  bool quiet = false;
};

void cmd_train_base(const ExperimentConfig& config, const RunOptions& opts);
void cmd_distill(const ExperimentConfig& config, const RunOptions& opts);
void cmd_finetune(const ExperimentConfig& config, const RunOptions& opts);
/// Writes eval.csv; rows for the base model and, when present, the tuned stack.
std::vector<RewardSummary> cmd_eval(const ExperimentConfig& config, const RunOptions& opts);
/// Finite-difference check of the stage-1 ShortFT objective; returns the max
/// relative error and writes gradcheck.csv.
double cmd_gradcheck(const ExperimentConfig& config, const RunOptions& opts);
/// Equal wall-clock budget per strategy; writes compare.csv.
void cmd_compare(const ExperimentConfig& config, const RunOptions& opts);

/// Loads the lab for an artifact directory, requiring the named phases.
Lab load_lab(const ExperimentConfig& config, const std::filesystem::path& dir, bool need_critic,
             bool need_student);

}  // namespace shortft
