// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "shortft/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::string task = "points2d";
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI config file (task defaults when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--task", c.task, "task for the built-in defaults when --config is omitted")
      ->check(CLI::IsMember({"points2d", "bars16"}));
  cmd->add_option("--out", c.out, "artifact directory")->required();
  cmd->add_option("--seed", c.seed, "experiment seed (overrides the config and SHORTFT_SEED)");
  cmd->add_flag("--force", c.force, "overwrite existing artifacts");
  cmd->add_flag("--quiet", c.quiet, "no progress on stderr");
}

shortft::ExperimentConfig resolve(const Common& c,
                                  std::vector<std::pair<std::string, std::string>> overrides) {
  shortft::ExperimentConfig config =
      c.config.empty() ? shortft::parse_config("[experiment]\ntask = " + c.task + "\n")
                       : shortft::load_config(c.config);
  if (c.seed) overrides.emplace_back("experiment.seed", std::to_string(*c.seed));
  shortft::apply_overrides(config, overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shortft: reward fine-tuning of toy diffusion models through denoising shortcuts"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train-base", "train the base denoiser and the reward critic");
  add_common(train, common);
  auto* distill = app.add_subcommand("distill", "distill the shortcut student from the base model");
  add_common(distill, common);

  auto* finetune = app.add_subcommand("finetune", "reward fine-tuning of LoRA adapters");
  add_common(finetune, common);
  std::string strategy;
  std::optional<int> K;
  std::optional<int> stages;
  finetune->add_option("--strategy", strategy, "vanilla, draft-k, stopgrad or shortft")
      ->check(CLI::IsMember({"vanilla", "draft-k", "stopgrad", "shortft"}));
  finetune->add_option("--K", K, "gradient-enabled prefix steps")->check(CLI::PositiveNumber);
  finetune->add_option("--stages", stages, "segments / progressive stages (plan k)")
      ->check(CLI::Range(2, 50));

  auto* eval = app.add_subcommand("eval", "evaluate the base model and the tuned adapters");
  add_common(eval, common);
  std::optional<std::size_t> n_eval;
  eval->add_option("--n", n_eval, "number of evaluation chains");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the stage-1 objective");
  add_common(gradcheck, common);

  auto* compare = app.add_subcommand("compare", "equal wall-clock comparison of strategies");
  add_common(compare, common);
  std::optional<double> budget;
  compare->add_option("--budget-seconds", budget, "wall-clock budget per strategy")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::pair<std::string, std::string>> overrides;
    if (!strategy.empty()) overrides.emplace_back("finetune.strategy", strategy);
    if (K) overrides.emplace_back("finetune.K", std::to_string(*K));
    if (stages) overrides.emplace_back("plan.k", std::to_string(*stages));
    if (n_eval) overrides.emplace_back("eval.n", std::to_string(*n_eval));
    if (budget) overrides.emplace_back("compare.budget_seconds", std::to_string(*budget));
    const shortft::ExperimentConfig config = resolve(common, std::move(overrides));
    const shortft::RunOptions opts{common.out, common.force, common.quiet};

    if (*train) {
      shortft::cmd_train_base(config, opts);
    } else if (*distill) {
      shortft::cmd_distill(config, opts);
    } else if (*finetune) {
      shortft::cmd_finetune(config, opts);
    } else if (*eval) {
      shortft::cmd_eval(config, opts);
    } else if (*gradcheck) {
      const double worst = shortft::cmd_gradcheck(config, opts);
      std::cout << "gradcheck max_rel_error " << shortft::format_double(worst) << '\n';
      return worst < 1e-3 ? 0 : 1;
    } else if (*compare) {
      shortft::cmd_compare(config, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "shortft: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
