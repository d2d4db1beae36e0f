"""The imitation pipeline: harvest victim labels, assemble, train.

The attacker only ever sees the query interface of the victim endpoints;
nothing here reads victim parameters or oracle labels. ImitationDataset
deliberately has no oracle-label field.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .models import TrainConfig, one_hot, train_model


@dataclass(frozen=True)
class HarvestResult:
    """Responses of K victims to one shared query batch, victim-major."""

    inputs: np.ndarray        # (N, D)
    probs: np.ndarray         # (K, N, C)
    hard: np.ndarray          # (K, N)
    victim_ids: tuple

    def __post_init__(self):
        if self.probs.ndim != 3 or self.hard.shape != self.probs.shape[:2]:
            raise ValueError("response grid must be rectangular (K, N, C)")
        if self.probs.shape[1] != len(self.inputs) or self.probs.shape[0] < 1:
            raise ValueError("grid does not match inputs")

    @property
    def num_victims(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class ImitationDataset:
    """Query/retrieved-label pairs ready for attack training."""

    inputs: np.ndarray        # (N', D)
    targets: np.ndarray       # (N', C) probability vectors
    input_ids: np.ndarray     # (N',) index into the harvested query batch
    victim_ids: np.ndarray    # (N',) victim index, -1 for averaged targets
    provenance: str           # "single:k" | "concat" | "average"
    label_mode: str

    def __post_init__(self):
        if not (len(self.inputs) == len(self.targets) == len(self.input_ids)
                == len(self.victim_ids)):
            raise ValueError("all columns must have equal length")
        if np.any(self.targets < 0) or np.any(np.abs(self.targets.sum(axis=1) - 1) > 1e-9):
            raise ValueError("targets must be probability vectors")
        if self.label_mode == "hard":
            if not np.all(np.isin(self.targets, (0.0, 1.0))):
                raise ValueError("hard mode targets must be one-hot")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def num_classes(self) -> int:
        return self.targets.shape[1]


def harvest(victims, inputs: np.ndarray) -> HarvestResult:
    """Query every victim on every input, in input order.

    Dimension mismatches are detected up front, before any victim is
    billed a single query.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if len(victims) < 1:
        raise ValueError("need at least one victim")
    if inputs.ndim != 2 or len(inputs) == 0:
        raise ValueError("inputs must be a nonempty (N, D) array")
    for k, v in enumerate(victims):
        if v.input_dim != inputs.shape[1]:
            raise ValueError(f"victim {k}: input dim {v.input_dim} != {inputs.shape[1]}")
    num_classes = victims[0].num_classes
    probs = np.zeros((len(victims), len(inputs), num_classes))
    hard = np.zeros((len(victims), len(inputs)), dtype=np.int64)
    for k, v in enumerate(victims):
        for i, x in enumerate(inputs):
            response = v.query(x)
            probs[k, i] = response.probs
            hard[k, i] = response.hard
    return HarvestResult(inputs=inputs, probs=probs, hard=hard,
                         victim_ids=tuple(range(len(victims))))


def _targets_for(h: HarvestResult, k: int, label_mode: str) -> np.ndarray:
    if label_mode == "hard":
        return one_hot(h.hard[k], h.probs.shape[2])
    return h.probs[k].copy()


def assemble(h: HarvestResult, strategy: str, label_mode: str = "soft") -> ImitationDataset:
    """Build the imitation training set from harvested responses.

    Strategies: ``single:k`` (one victim), ``concat`` (every input
    duplicated once per victim, victim-major order) and ``average``
    (mean of the victims' probability vectors; soft labels only).
    """
    if label_mode not in ("soft", "hard"):
        raise ValueError("label_mode must be 'soft' or 'hard'")
    n = len(h.inputs)
    ids = np.arange(n)
    if strategy.startswith("single:"):
        k = int(strategy.split(":", 1)[1])
        if not 0 <= k < h.num_victims:
            raise ValueError(f"victim index {k} out of range")
        return ImitationDataset(h.inputs, _targets_for(h, k, label_mode),
                                ids, np.full(n, k), f"single:{k}", label_mode)
    if strategy == "concat":
        inputs = np.concatenate([h.inputs] * h.num_victims)
        targets = np.concatenate([_targets_for(h, k, label_mode)
                                  for k in range(h.num_victims)])
        input_ids = np.concatenate([ids] * h.num_victims)
        victim_ids = np.repeat(np.arange(h.num_victims), n)
        return ImitationDataset(inputs, targets, input_ids, victim_ids,
                                "concat", label_mode)
    if strategy == "average":
        if label_mode != "soft":
            raise ValueError("average ensembling requires soft labels")
        return ImitationDataset(h.inputs, h.probs.mean(axis=0), ids,
                                np.full(n, -1), "average", label_mode)
    raise ValueError(f"unknown strategy {strategy!r}")


def imitate(ds: ImitationDataset, kind: str, cfg: TrainConfig,
            hidden_dim: int | None = None):
    """Train the attack model on retrieved labels alone."""
    if len(ds) == 0:
        raise ValueError("imitation dataset is empty")
    return train_model(kind, ds.inputs.shape[1], ds.num_classes,
                       ds.inputs, ds.targets, cfg, hidden_dim=hidden_dim)


def export_imitation_csv(ds: ImitationDataset, path) -> None:
    """Audit export: one row per training example with its full target."""
    num_classes = ds.num_classes
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input_id", "victim_id"]
                        + [f"target_{c}" for c in range(num_classes)])
        for input_id, victim_id, target in zip(ds.input_ids, ds.victim_ids, ds.targets):
            writer.writerow([int(input_id), int(victim_id)]
                            + [format(v, ".17g") for v in target])
