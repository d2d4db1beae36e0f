import copy
import json
import os

import numpy as np
import pytest

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def load_benchmark_config() -> dict:
    with open(os.path.join(CONFIG_DIR, "gaussian_shift_benchmark.json"),
              encoding="utf-8") as fh:
        return json.load(fh)


def benchmark_variant(**overrides) -> dict:
    """Deep-copied benchmark config with top-level section overrides."""
    cfg = copy.deepcopy(load_benchmark_config())
    for key, value in overrides.items():
        cfg[key] = value
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tiny_tabular_config(seeds=(0, 1)) -> dict:
    """Small tabular experiment that runs in well under a second."""
    return {
        "data": {"generator": "tabular",
                 "p_source": [0.4, 0.3, 0.2, 0.1],
                 "p_target": [0.1, 0.2, 0.3, 0.4],
                 "oracle_rule": [0, 1, 0, 1],
                 "n_source": 200, "n_target": 200, "num_classes": 2,
                 "target_eval_fraction": 0.25},
        "victims": [
            {"kind": "linear", "train": {"epochs": 5}, "price_per_query": "0.001"},
            {"kind": "linear", "train": {"epochs": 5}, "price_per_query": "0.002"},
        ],
        "attacker": {"kind": "linear", "train": {"epochs": 5},
                     "label_mode": "soft", "strategy": "concat"},
        "evaluation": {"seeds": list(seeds),
                       "metrics": ["accuracy", "risks", "bound", "diversity",
                                   "cost"]},
        "human_price_per_label": "0.05",
    }
