// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "shortft/rewards.hpp"

#include <cmath>
#include <sstream>

#include "shortft/rng.hpp"

namespace shortft {

std::string_view reward_kind_name(RewardKind kind) {
  switch (kind) {
    case RewardKind::kSymmetry: return "symmetry";
    case RewardKind::kCritic: return "critic";
    case RewardKind::kTv: return "tv";
    case RewardKind::kCombined: return "combined";
  }
  return "?";
}

namespace {

RewardKind parse_component(std::string_view name) {
  if (name == "symmetry") return RewardKind::kSymmetry;
  if (name == "critic") return RewardKind::kCritic;
  if (name == "tv") return RewardKind::kTv;
  throw std::invalid_argument("unknown reward '" + std::string(name) + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RewardSpec RewardSpec::parse(std::string_view text) {
  const std::string t = trim(text);
  RewardSpec spec;
  constexpr std::string_view kPrefix = "combined:";
  if (t.rfind(kPrefix, 0) != 0) {
    spec.kind = parse_component(t);
    return spec;
  }
  spec.kind = RewardKind::kCombined;
  const std::string body = t.substr(kPrefix.size());
  if (body == "reference") {
    spec.terms = {{RewardKind::kCritic, 10.0}, {RewardKind::kSymmetry, 2.0}, {RewardKind::kTv, 0.05}};
    return spec;
  }
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("combined reward term '" + item + "' lacks '=<weight>'");
    }
    const std::string name = trim(std::string_view(item).substr(0, eq));
    const std::string w = trim(std::string_view(item).substr(eq + 1));
    std::size_t used = 0;
    double weight = 0.0;
    try {
      weight = std::stod(w, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != w.size() || w.empty() || !std::isfinite(weight)) {
      throw std::invalid_argument("combined reward weight '" + w + "' is not a finite number");
    }
    spec.terms.push_back({parse_component(name), weight});
  }
  if (spec.terms.size() < 2) {
    throw std::invalid_argument("combined reward needs at least two terms");
  }
  return spec;
}

std::string RewardSpec::to_string() const {
  if (kind != RewardKind::kCombined) return std::string(reward_kind_name(kind));
  std::ostringstream os;
  os << "combined:";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    os << (i ? "," : "") << reward_kind_name(terms[i].kind) << '=' << terms[i].weight;
  }
  return os.str();
}

CriticParams init_critic(std::size_t data_dim, std::size_t num_classes,
                         const CriticConfig& config) {
  CriticParams c;
  c.num_classes = num_classes;
  c.net = init_mlp(ParamRole::kCritic, data_dim, config.hidden, config.depth, num_classes, 0, 0,
                   config.seed);
  return c;
}

Var critic_logits(Tape& tape, const CriticParams& critic, Var x) {
  return mlp_forward(tape, critic.net, x, Binding{});
}

namespace {

Var critic_logits_trainable(Tape& tape, const CriticParams& critic, Var x) {
  return mlp_forward(tape, critic.net, x, Binding{true, nullptr, {}});
}

Tensor label_mask(std::span<const int> labels, std::size_t num_classes) {
  Tensor m({labels.size(), num_classes}, 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int c = labels[r];
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw std::invalid_argument("critic reward needs a class condition, got " +
                                  std::to_string(c));
    }
    m.at(r, static_cast<std::size_t>(c)) = 1.0;
  }
  return m;
}

}  // namespace

double critic_accuracy(const CriticParams& critic, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  Tape tape;
  NoGradGuard guard(tape);
  const Tensor logits = critic_logits(tape, critic, tape.constant_ref(data.x)).value();
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < critic.num_classes; ++c) {
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    }
    hits += static_cast<int>(best) == data.labels[r];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

CriticParams train_critic(const Dataset& data, const CriticConfig& config, CriticReport* report) {
  const auto holdout = static_cast<std::size_t>(static_cast<double>(data.size()) *
                                                config.holdout_fraction);
  if (holdout == 0 || holdout >= data.size()) {
    throw std::invalid_argument("train_critic: holdout split leaves an empty side");
  }
  const Dataset train = data.slice(0, data.size() - holdout);
  const Dataset held = data.slice(data.size() - holdout, data.size());
  CriticParams critic = init_critic(data.dim(), data.num_classes, config);
  AdamW opt(config.optimizer);
  const std::vector<ParamRef> refs = critic.net.refs();
  std::vector<GradRequest> requests;
  for (const ParamRef& r : refs) requests.push_back({r.id, r.value->shape()});
  double last = 0.0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    CounterRng rng(config.seed, Phase::kCriticTrain, step);
    Tensor xb({config.batch, data.dim()});
    std::vector<int> yb(config.batch);
    for (std::size_t r = 0; r < config.batch; ++r) {
      const std::size_t i = rng.below(train.size());
      yb[r] = train.labels[i];
      for (std::size_t q = 0; q < data.dim(); ++q) xb.at(r, q) = train.x.at(i, q);
    }
    Tape tape;
    Var x = tape.constant(std::move(xb));
    Var lp = log_softmax(critic_logits_trainable(tape, critic, x));
    Tensor target = label_mask(yb, critic.num_classes);
    const double off = config.label_smoothing / static_cast<double>(critic.num_classes);
    for (double& v : target.data()) v = (1.0 - config.label_smoothing) * v + off;
    Var nll = scale(sum(lp * tape.constant(std::move(target))),
                    -1.0 / static_cast<double>(config.batch));
    opt.step(refs, tape.backward(nll, requests));
    last = nll.value().item();
  }
  const double acc = critic_accuracy(critic, held);
  if (report) *report = {acc, last};
  if (acc < config.min_accuracy) {
    throw CriticQualityError("critic held-out accuracy " + std::to_string(acc) +
                             " below required " + std::to_string(config.min_accuracy));
  }
  return critic;
}

std::size_t image_side(std::size_t dim) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side != dim) {
    throw ShapeError("image reward: row of " + std::to_string(dim) +
                     " values is not a square image");
  }
  return side;
}

Var reward_symmetry(Var x) {
  const std::size_t side = image_side(x.value().cols());
  return scale(mean(square(x - hflip(x, side))), -1.0);
}

Var reward_critic(Tape& tape, const CriticParams& critic, Var x, std::span<const int> conditions) {
  const std::size_t n = x.value().rows();
  if (conditions.size() != n) {
    throw ShapeError("reward_critic: " + std::to_string(conditions.size()) + " conditions for " +
                     std::to_string(n) + " rows");
  }
  Var lp = log_softmax(critic_logits(tape, critic, x));
  return scale(sum(lp * tape.constant(label_mask(conditions, critic.num_classes))),
               1.0 / static_cast<double>(n));
}

namespace {

// Forward differences along one image axis as a constant [dim, count] matrix.
Tensor difference_matrix(std::size_t side, bool along_width) {
  const std::size_t dim = side * side;
  const std::size_t count = side * (side - 1);
  Tensor d({dim, count}, 0.0);
  std::size_t col = 0;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c + 1 < side; ++c) {
      const std::size_t a = along_width ? r * side + c : c * side + r;
      const std::size_t b = along_width ? r * side + c + 1 : (c + 1) * side + r;
      d.at(a, col) = -1.0;
      d.at(b, col) = 1.0;
      ++col;
    }
  }
  return d;
}

}  // namespace

Var reward_tv(Var x, double eps) {
  const std::size_t side = image_side(x.value().cols());
  if (side < 2) throw ShapeError("reward_tv: image side must be >= 2");
  Tape& tape = x.tape();
  Var dh = matmul(x, tape.constant(difference_matrix(side, false)));
  Var dw = matmul(x, tape.constant(difference_matrix(side, true)));
  return scale(mean(smooth_abs(dh, eps)) + mean(smooth_abs(dw, eps)), -1.0);
}

Var reward_combined(std::span<const double> weights, std::span<const Var> components) {
  if (weights.size() != components.size() || components.empty()) {
    throw std::invalid_argument("reward_combined: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(components.size()) +
                                " components");
  }
  Var total = scale(components[0], weights[0]);
  for (std::size_t i = 1; i < components.size(); ++i) {
    total = total + scale(components[i], weights[i]);
  }
  return total;
}

namespace {

Var component(Tape& tape, RewardKind kind, const RewardContext& ctx, Var x,
              std::span<const int> conditions) {
  switch (kind) {
    case RewardKind::kSymmetry: return reward_symmetry(x);
    case RewardKind::kTv: return reward_tv(x);
    case RewardKind::kCritic:
      if (!ctx.critic) throw std::invalid_argument("critic reward requested without a critic");
      return reward_critic(tape, *ctx.critic, x, conditions);
    case RewardKind::kCombined: break;
  }
  throw std::invalid_argument("nested combined reward");
}

}  // namespace

Var evaluate_reward(Tape& tape, const RewardSpec& spec, const RewardContext& ctx, Var x,
                    std::span<const int> conditions) {
  if (spec.kind != RewardKind::kCombined) return component(tape, spec.kind, ctx, x, conditions);
  std::vector<Var> parts;
  std::vector<double> weights;
  for (const RewardSpec::Term& t : spec.terms) {
    parts.push_back(component(tape, t.kind, ctx, x, conditions));
    weights.push_back(t.weight);
  }
  return reward_combined(weights, parts);
}

std::vector<double> reward_per_sample(const RewardSpec& spec, const RewardContext& ctx,
                                      const Tensor& x, std::span<const int> conditions) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Tape tape;
    NoGradGuard guard(tape);
    out[r] = evaluate_reward(tape, spec, ctx, tape.constant(x.slice_rows(r, r + 1)),
                             conditions.subspan(r, 1))
                 .value()
                 .item();
  }
  return out;
}

}  // namespace shortft
