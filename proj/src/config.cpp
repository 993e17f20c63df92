// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "shortft/harness.hpp"

namespace shortft {

ExperimentConfig ExperimentConfig::defaults(TaskKind task) {
  ExperimentConfig c;
  c.task = task;
  const TaskShape shape = task_shape(task);
  c.denoiser.data_dim = shape.dim;
  c.denoiser.num_classes = shape.num_classes;
  c.student = c.denoiser;
  c.finetune.optimizer.lr = 3e-3;
  c.finetune.steps_per_stage = 200;
  c.finetune.chain.inference_rule = InferenceActivation::kAssignedStepOnly;
  if (task == TaskKind::kBars16) {
    c.denoiser.hidden = 256;
    c.student.hidden = 256;
    c.gaussian_skip = true;
    c.base.steps = 6000;
    c.base.batch = 128;
    c.distill.steps = 3000;
    c.distill.batch = 128;
    c.reward = RewardSpec::parse("symmetry");
  } else {
    c.reward = RewardSpec::parse("critic");
  }
  return c;
}

namespace {

struct Field {
  std::string key;  // section.name
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": '" + v + "' is not a number");
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return n;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

#define SIZE_FIELD(name, member)                                                    \
  Field {                                                                           \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = to_size(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }          \
  }
#define INT_FIELD(name, member)                                                     \
  Field {                                                                           \
    name,                                                                           \
        [](ExperimentConfig& c, const std::string& v) {                             \
          c.member = static_cast<decltype(c.member)>(to_int(name, v));              \
        },                                                                          \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }          \
  }
#define DOUBLE_FIELD(name, member)                                                    \
  Field {                                                                             \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = to_double(name, v); }, \
        [](const ExperimentConfig& c) { return format_double(c.member); }             \
  }
#define BOOL_FIELD(name, member)                                                    \
  Field {                                                                           \
    name, [](ExperimentConfig& c, const std::string& v) { c.member = to_bool(name, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"experiment.task",
            [](ExperimentConfig& c, const std::string& v) {
              c.task = wrap("experiment.task", [&] { return parse_task(v); });
            },
            [](const ExperimentConfig& c) { return std::string(task_name(c.task)); }},
      INT_FIELD("experiment.seed", seed),
      INT_FIELD("experiment.model_seed", model_seed),

      INT_FIELD("schedule.T", T),
      Field{"schedule.kind",
            [](ExperimentConfig& c, const std::string& v) {
              c.schedule = wrap("schedule.kind", [&] { return parse_schedule_kind(v); });
            },
            [](const ExperimentConfig& c) { return std::string(schedule_kind_name(c.schedule)); }},
      INT_FIELD("schedule.steps", steps),
      DOUBLE_FIELD("schedule.guidance_scale", guidance_scale),

      INT_FIELD("plan.k", k),

      SIZE_FIELD("model.time_dim", denoiser.time_dim),
      SIZE_FIELD("model.class_dim", denoiser.class_dim),
      SIZE_FIELD("model.hidden", denoiser.hidden),
      SIZE_FIELD("model.depth", denoiser.depth),
      BOOL_FIELD("model.gaussian_skip", gaussian_skip),

      SIZE_FIELD("base.steps", base.steps),
      SIZE_FIELD("base.batch", base.batch),
      SIZE_FIELD("base.dataset_size", base.dataset_size),
      DOUBLE_FIELD("base.lr", base.lr),
      DOUBLE_FIELD("base.cond_dropout", base.cond_dropout),
      SIZE_FIELD("base.log_every", base.log_every),

      SIZE_FIELD("critic.hidden", critic.hidden),
      SIZE_FIELD("critic.depth", critic.depth),
      SIZE_FIELD("critic.steps", critic.steps),
      SIZE_FIELD("critic.batch", critic.batch),
      SIZE_FIELD("critic.train_size", critic.train_size),
      DOUBLE_FIELD("critic.lr", critic.optimizer.lr),
      DOUBLE_FIELD("critic.min_accuracy", critic.min_accuracy),
      DOUBLE_FIELD("critic.label_smoothing", critic.label_smoothing),

      SIZE_FIELD("student.time_dim", student.time_dim),
      SIZE_FIELD("student.class_dim", student.class_dim),
      SIZE_FIELD("student.hidden", student.hidden),
      SIZE_FIELD("student.depth", student.depth),

      SIZE_FIELD("distill.steps", distill.steps),
      SIZE_FIELD("distill.batch", distill.batch),
      SIZE_FIELD("distill.pool_size", distill.pool_size),
      DOUBLE_FIELD("distill.identity_fraction", distill.identity_fraction),
      SIZE_FIELD("distill.probes_per_step", distill.probes_per_step),
      SIZE_FIELD("distill.epoch_steps", distill.epoch_steps),
      DOUBLE_FIELD("distill.lr", distill.optimizer.lr),
      DOUBLE_FIELD("distill.teacher_loss_threshold", distill.teacher_loss_threshold),

      SIZE_FIELD("lora.rank", lora_rank),
      DOUBLE_FIELD("lora.scale", lora_scale),
      Field{"lora.inference_activation",
            [](ExperimentConfig& c, const std::string& v) {
              c.finetune.chain.inference_rule =
                  wrap("lora.inference_activation", [&] { return parse_inference_activation(v); });
            },
            [](const ExperimentConfig& c) {
              return std::string(inference_activation_name(c.finetune.chain.inference_rule));
            }},
      Field{"lora.layout",
            [](ExperimentConfig& c, const std::string& v) {
              c.finetune.chain.layout = wrap("lora.layout", [&] { return parse_adapter_layout(v); });
            },
            [](const ExperimentConfig& c) {
              return std::string(adapter_layout_name(c.finetune.chain.layout));
            }},

      Field{"finetune.strategy",
            [](ExperimentConfig& c, const std::string& v) {
              c.finetune.strategy = wrap("finetune.strategy", [&] { return parse_strategy(v); });
            },
            [](const ExperimentConfig& c) { return std::string(strategy_name(c.finetune.strategy)); }},
      INT_FIELD("finetune.K", finetune.chain.K),
      BOOL_FIELD("finetune.progressive", finetune.progressive),
      INT_FIELD("finetune.single_stage", finetune.single_stage),
      SIZE_FIELD("finetune.steps_per_stage", finetune.steps_per_stage),
      DOUBLE_FIELD("finetune.budget_seconds", finetune.budget_seconds),
      SIZE_FIELD("finetune.batch", finetune.batch),
      DOUBLE_FIELD("finetune.lr", finetune.optimizer.lr),
      DOUBLE_FIELD("finetune.beta1", finetune.optimizer.beta1),
      DOUBLE_FIELD("finetune.beta2", finetune.optimizer.beta2),
      DOUBLE_FIELD("finetune.weight_decay", finetune.optimizer.weight_decay),
      DOUBLE_FIELD("finetune.explosion_factor", finetune.explosion_factor),

      Field{"reward.spec",
            [](ExperimentConfig& c, const std::string& v) {
              c.reward = wrap("reward.spec", [&] { return RewardSpec::parse(v); });
            },
            [](const ExperimentConfig& c) { return c.reward.to_string(); }},

      SIZE_FIELD("eval.n", eval.n),
      INT_FIELD("eval.seed", eval.seed),
      Field{"eval.rewards",
            [](ExperimentConfig& c, const std::string& v) {
              c.eval.rewards.clear();
              for (const std::string& s : split_list(v)) {
                c.eval.rewards.push_back(wrap("eval.rewards", [&] { return RewardSpec::parse(s); }));
              }
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (const RewardSpec& r : c.eval.rewards) out += (out.empty() ? "" : "; ") + r.to_string();
              return out;
            }},

      DOUBLE_FIELD("compare.budget_seconds", compare.budget_seconds),
      Field{"compare.strategies",
            [](ExperimentConfig& c, const std::string& v) {
              c.compare.strategies.clear();
              for (const std::string& s : split_list(v)) {
                c.compare.strategies.push_back(
                    wrap("compare.strategies", [&] { return parse_strategy(s); }));
              }
            },
            [](const ExperimentConfig& c) {
              std::string out;
              for (Strategy s : c.compare.strategies) {
                out += (out.empty() ? "" : "; ") + std::string(strategy_name(s));
              }
              return out;
            }},
  };
  return table;
}

#undef SIZE_FIELD
#undef INT_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void finalize(ExperimentConfig& c) {
  const TaskShape shape = task_shape(c.task);
  c.denoiser.data_dim = shape.dim;
  c.denoiser.num_classes = shape.num_classes;
  c.student.data_dim = shape.dim;
  c.student.num_classes = shape.num_classes;
  c.finetune.stages = c.k;
  c.finetune.seed = c.seed;
  c.critic.seed = c.model_seed;
  c.distill.seed = c.model_seed;
  c.distill.guidance_scale = c.guidance_scale;
  if (c.k < 2) throw ConfigError("plan.k must be >= 2");
  if (c.finetune.chain.K < 1) throw ConfigError("finetune.K must be >= 1");
  if (c.finetune.single_stage < 0 || c.finetune.single_stage > c.k) {
    throw ConfigError("finetune.single_stage must lie in [0, plan.k]");
  }
  if (c.denoiser.time_dim % 2 || c.student.time_dim % 2) {
    throw ConfigError("time_dim must be even");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  // The task picks the defaults, so read it first.
  TaskKind task = TaskKind::kPoints2d;
  if (auto t = tree.get_optional<std::string>("experiment.task")) {
    task = wrap("experiment.task", [&] { return parse_task(*t); });
  }
  ExperimentConfig c = ExperimentConfig::defaults(task);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside a section");
    }
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const Field* f = find_field(key);
      if (!f) throw ConfigError("config: unknown key '" + key + "'");
      f->set(c, value.data());
    }
  }
  if (const char* env = std::getenv("SHORTFT_SEED")) {
    c.seed = static_cast<std::uint64_t>(to_int("SHORTFT_SEED", env));
  }
  finalize(c);
  return c;
}

void apply_overrides(ExperimentConfig& config,
                     const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [key, value] : overrides) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("config: unknown key '" + key + "'");
    if (key == "experiment.task") throw ConfigError("config: the task cannot be overridden");
    f->set(config, value);
  }
  finalize(config);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const ExperimentConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      os << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
  return os.str();
}

}  // namespace shortft
