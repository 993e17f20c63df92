# Copyright 2026 The ShortFT Lab Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the shortft C++ core."""

from ._core import (
    CheckpointError,
    Config,
    ConfigError,
    PipelineError,
    chain,
    compare,
    distill,
    evaluate,
    finetune,
    generate_dataset,
    gradcheck,
    reward,
    segment_plan,
    train_base,
)

__all__ = [
    "CheckpointError",
    "Config",
    "ConfigError",
    "PipelineError",
    "chain",
    "compare",
    "distill",
    "evaluate",
    "finetune",
    "generate_dataset",
    "gradcheck",
    "reward",
    "segment_plan",
    "train_base",
]
