"""Python front end for the exotune core.

Configs are plain dicts with the same layout as the JSON config files; any
key left out keeps its default.
"""

import json

from . import _exotune
from ._exotune import (
    CheckpointError,
    ConfigError,
    Dataset,
    DatasetError,
    DivergenceError,
    IoError,
    Model,
    action_features,
    coefficient_count,
    compute_reward,
    joint_speed,
    merge_datasets,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Dataset",
    "DatasetError",
    "DivergenceError",
    "IoError",
    "Model",
    "action_features",
    "coefficient_count",
    "collect",
    "compute_reward",
    "default_config",
    "evaluate",
    "gridscan",
    "joint_speed",
    "load_model",
    "merge_datasets",
    "run_command",
    "train",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_exotune.default_config())


def collect(config=None):
    return _exotune.collect(_dump(config))


def train(dataset, config=None):
    return _exotune.train(_dump(config), dataset)


def load_model(path):
    return _exotune.load_model(str(path))


def gridscan(config=None):
    return _exotune.gridscan(_dump(config))


def evaluate(model, config=None):
    """Mean and per-episode metrics of the model's greedy policy.

    Without a config the run settings stored with the model are used.
    """
    return model.evaluate(_dump(config) if config is not None else "")


def run_command(command, config=None, out="", datasets=(), checkpoint="", input=""):
    return _exotune.run_command(
        command,
        None if config is None else str(config),
        str(out),
        [str(d) for d in datasets],
        str(checkpoint),
        str(input),
    )
