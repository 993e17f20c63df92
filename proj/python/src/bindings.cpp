// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shortft/harness.hpp"

namespace py = pybind11;
using namespace shortft;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

RunOptions run_options(const std::filesystem::path& out, bool force) {
  return RunOptions{out, force, true};
}

py::dict summary_dict(const RewardSummary& s) {
  py::dict d;
  d["reward"] = s.reward;
  d["mean"] = s.mean;
  d["std"] = s.stddev;
  d["n"] = s.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Reward fine-tuning of toy diffusion models through denoising shortcuts";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("parse", &parse_config, py::arg("text") = "")
      .def_static("load", [](const std::filesystem::path& p) { return load_config(p); })
      .def("override",
           [](ExperimentConfig& c, const std::map<std::string, std::string>& kv) {
             apply_overrides(c, {kv.begin(), kv.end()});
             return c;
           })
      .def("to_text", &config_to_text)
      .def_property_readonly("task", [](const ExperimentConfig& c) { return std::string(task_name(c.task)); })
      .def_property_readonly("seed", [](const ExperimentConfig& c) { return c.seed; })
      .def_property_readonly("k", [](const ExperimentConfig& c) { return c.k; })
      .def("__repr__", [](const ExperimentConfig& c) {
        return "<Config task=" + std::string(task_name(c.task)) + " seed=" + std::to_string(c.seed) + ">";
      });

  m.def("segment_plan", [](int T, int steps, int k) {
    const NoiseSchedule s = build_schedule(T, ScheduleKind::kLinear, steps);
    const SegmentPlan p = build_segment_plan(s, k);
    py::dict d;
    d["step_list"] = p.step_list;
    d["boundaries"] = p.boundaries;
    d["lora_timesteps"] = p.lora_timesteps;
    std::vector<std::pair<int, int>> spans;
    for (const ShortcutSpan& sp : p.shortcut_spans) spans.emplace_back(sp.from, sp.to);
    d["shortcut_spans"] = spans;
    return d;
  }, py::arg("T") = 1000, py::arg("steps") = 50, py::arg("k") = 4);

  m.def("chain", [](const std::string& strategy, int stage, int K, int T, int steps, int k) {
    const NoiseSchedule s = build_schedule(T, ScheduleKind::kLinear, steps);
    const SegmentPlan p = build_segment_plan(s, k);
    ChainOptions o;
    o.K = K;
    const ChainSpec c = build_chain(p, parse_strategy(strategy), stage, o);
    py::dict d;
    d["nodes"] = c.nodes.size();
    d["grad_enabled"] = c.grad_enabled_count();
    d["jumps"] = c.jump_count();
    d["describe"] = c.describe();
    return d;
  }, py::arg("strategy"), py::arg("stage") = 1, py::arg("K") = 1, py::arg("T") = 1000,
     py::arg("steps") = 50, py::arg("k") = 4);

  m.def("generate_dataset", [](const std::string& task, std::size_t n, std::uint64_t seed) {
    const Dataset d = generate_dataset(parse_task(task), n, seed);
    return py::make_tuple(to_numpy(d.x), d.labels);
  }, py::arg("task"), py::arg("n"), py::arg("seed"));

  m.def("reward", [](const std::string& spec,
                     const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                     const std::vector<int>& conditions) {
    return reward_per_sample(RewardSpec::parse(spec), {}, from_numpy(x), conditions);
  }, py::arg("spec"), py::arg("x"), py::arg("conditions"),
     "Per-row rewards for critic-free specs (symmetry, tv and their mixes).");

  m.def("train_base", [](const ExperimentConfig& c, const std::filesystem::path& out, bool force) {
    py::gil_scoped_release release;
    cmd_train_base(c, run_options(out, force));
  }, py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def("distill", [](const ExperimentConfig& c, const std::filesystem::path& out, bool force) {
    py::gil_scoped_release release;
    cmd_distill(c, run_options(out, force));
  }, py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def("finetune", [](const ExperimentConfig& c, const std::filesystem::path& out, bool force) {
    py::gil_scoped_release release;
    cmd_finetune(c, run_options(out, force));
  }, py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def("evaluate", [](const ExperimentConfig& c, const std::filesystem::path& out, bool force) {
    std::vector<RewardSummary> rows;
    {
      py::gil_scoped_release release;
      rows = cmd_eval(c, run_options(out, force));
    }
    py::list l;
    for (const RewardSummary& s : rows) l.append(summary_dict(s));
    return l;
  }, py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def("gradcheck", [](const ExperimentConfig& c, const std::filesystem::path& out) {
    py::gil_scoped_release release;
    return cmd_gradcheck(c, run_options(out, true));
  }, py::arg("config"), py::arg("out"));
  m.def("compare", [](const ExperimentConfig& c, const std::filesystem::path& out, bool force) {
    py::gil_scoped_release release;
    cmd_compare(c, run_options(out, force));
  }, py::arg("config"), py::arg("out"), py::arg("force") = false);
}
