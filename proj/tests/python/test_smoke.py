# Copyright 2026 The ShortFT Lab Authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import pyshortft as sf

TINY = """
[experiment]
task = points2d
seed = 3
[model]
hidden = 16
depth = 2
time_dim = 8
class_dim = 4
[student]
hidden = 16
depth = 2
time_dim = 8
class_dim = 4
[base]
steps = 40
batch = 32
dataset_size = 256
[critic]
hidden = 8
steps = 200
batch = 32
train_size = 1000
[distill]
steps = 10
batch = 16
pool_size = 200
probes_per_step = 1
epoch_steps = 5
[finetune]
steps_per_stage = 2
batch = 4
[eval]
n = 6
"""


def test_segment_plan_defaults():
    plan = sf.segment_plan()
    assert plan["lora_timesteps"] == [761, 501, 261, 1]
    assert plan["shortcut_spans"] == [(741, 501), (481, 261), (241, 1)]
    assert len(plan["step_list"]) == 50


def test_chain_counts():
    assert sf.chain("shortft", stage=1)["grad_enabled"] == 7
    assert sf.chain("vanilla")["grad_enabled"] == 50
    with pytest.raises(Exception):
        sf.chain("adam")


def test_dataset_and_rewards():
    x, labels = sf.generate_dataset("bars16", 8, 1)
    assert x.shape == (8, 256)
    assert set(labels) <= {0, 1}
    sym = np.asarray(sf.reward("symmetry", x, labels))
    mirrored = x.reshape(8, 16, 16)[:, :, ::-1].reshape(8, 256)
    assert np.allclose(sym, sf.reward("symmetry", mirrored, labels))
    assert np.all(sym <= 0)
    assert np.allclose(sf.reward("symmetry", x + mirrored, labels), 0.0)


def test_config_errors():
    with pytest.raises(sf.ConfigError):
        sf.Config.parse("[base]\nstepz = 1\n")
    c = sf.Config.parse(TINY).override({"experiment.seed": "11"})
    assert c.seed == 11
    assert sf.Config.parse(c.to_text()).to_text() == c.to_text()


def test_pipeline(tmp_path):
    c = sf.Config.parse(TINY)
    out = tmp_path / "run"
    with pytest.raises(sf.PipelineError, match="train-base"):
        sf.distill(c, out)
    sf.train_base(c, out)
    with pytest.raises(sf.PipelineError, match="distill"):
        sf.finetune(c, out)
    sf.distill(c, out)
    sf.finetune(c, out)
    rows = sf.evaluate(c, out)
    assert [r["n"] for r in rows] == [6, 6]
    assert (out / "metrics.csv").read_text().startswith("step,stage,strategy,J")
    assert sf.gradcheck(c, out) < 1e-3
