"""Risk functionals, total-variation measures, bound reports and costs.

Two disagreement modes are used everywhere and never mixed inside one
inequality: ``hard`` is mean 0/1 disagreement of predicted classes,
``soft`` is mean half-L1 distance between output distributions. Both are
pseudometrics with values in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .data import LabeledDataset, TabularDomainSpec
from .models import TrainConfig, one_hot, train_model

BOUND_SLACK = 1e-9


def _as_probs(source, X: np.ndarray, num_classes: int | None) -> np.ndarray:
    """Normalize a prediction source to an (N, C) matrix of distributions.

    Accepts fitted models (predict_proba), victim endpoints (query),
    stored probability matrices, or integer oracle-label sequences
    (encoded one-hot).
    """
    if hasattr(source, "predict_proba"):
        return np.asarray(source.predict_proba(X), dtype=np.float64)
    if hasattr(source, "query"):
        return np.stack([source.query(x).probs for x in X])
    arr = np.asarray(source)
    if arr.ndim == 2:
        if len(arr) != len(X):
            raise ValueError("stored predictions do not match dataset length")
        return arr.astype(np.float64)
    if arr.ndim == 1:
        if len(arr) != len(X):
            raise ValueError("label sequence does not match dataset length")
        if num_classes is None:
            raise ValueError("num_classes needed to one-hot a label sequence")
        return one_hot(arr.astype(np.int64), num_classes)
    raise TypeError(f"unsupported prediction source: {type(source).__name__}")


def disagreement_risk(f, g, X: np.ndarray, mode: str = "hard",
                      weights: np.ndarray | None = None,
                      num_classes: int | None = None) -> float:
    """Expected disagreement between two prediction sources over X.

    hard: mean 0/1 disagreement of argmax classes; soft: mean half-L1
    distance of probability vectors. ``weights`` turns the mean into an
    exact expectation over a finite support.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("risk is undefined on an empty dataset")
    if mode not in ("hard", "soft"):
        raise ValueError("mode must be 'hard' or 'soft'")
    pf = _as_probs(f, X, num_classes)
    pg = _as_probs(g, X, num_classes)
    if pf.shape != pg.shape:
        raise ValueError("prediction sources disagree on shape")
    if mode == "hard":
        per_example = (np.argmax(pf, axis=1) != np.argmax(pg, axis=1)).astype(float)
    else:
        per_example = 0.5 * np.abs(pf - pg).sum(axis=1)
    if weights is None:
        return float(per_example.mean())
    weights = np.asarray(weights, dtype=np.float64)
    return float(per_example @ weights)


def tv_exact(spec: TabularDomainSpec) -> float:
    """Exact total variation between the spec's source and target tables."""
    return 0.5 * float(np.abs(spec.p_source - spec.p_target).sum())


def tv_discriminator(source: LabeledDataset, target: LabeledDataset,
                     cfg: TrainConfig | None = None) -> float:
    """Lower-bound-style TV estimate from a trained domain discriminator.

    Pools the two datasets, splits 50/50, trains a linear domain classifier
    on one half and returns max(0, 2a - 1) where a is balanced accuracy on
    the held-out half.
    """
    if len(source) < 4 or len(target) < 4:
        raise ValueError("each dataset needs at least 4 examples")
    cfg = cfg or TrainConfig(epochs=20)
    X = np.concatenate([source.X, target.X])
    d = np.concatenate([np.zeros(len(source), dtype=np.int64),
                        np.ones(len(target), dtype=np.int64)])
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(X))
    X, d = X[order], d[order]
    half = len(X) // 2
    clf = train_model("linear", X.shape[1], 2, X[:half], d[:half], cfg)
    pred = clf.predict(X[half:])
    truth = d[half:]
    accs = []
    for dom in (0, 1):
        mask = truth == dom
        if not mask.any():
            return 0.0
        accs.append(float(np.mean(pred[mask] == truth[mask])))
    balanced = float(np.mean(accs))
    return max(0.0, 2.0 * balanced - 1.0)


@dataclass(frozen=True)
class RiskReport:
    """All terms of the attacker-risk bound for one victim/attacker pair."""

    epsilon_v: float
    epsilon_a: float
    imitation_gap: float
    tv: float
    bound_rhs: float
    bound_holds: bool
    mode: str

    def to_dict(self) -> dict:
        return {
            "epsilon_v": self.epsilon_v,
            "epsilon_a": self.epsilon_a,
            "imitation_gap": self.imitation_gap,
            "tv": self.tv,
            "bound_rhs": self.bound_rhs,
            "bound_holds": self.bound_holds,
            "mode": self.mode,
        }


def da_bound_report(victim, attacker, source_ds: LabeledDataset,
                    target_ds: LabeledDataset, tv_value: float,
                    mode: str = "hard") -> RiskReport:
    """Attacker-risk decomposition: victim risk + 2*TV + imitation gap.

    The imitation gap takes the smaller of the victim/attacker disagreement
    over the source and target inputs.
    """
    if not 0.0 <= tv_value <= 1.0 + BOUND_SLACK:
        raise ValueError("tv_value must lie in [0, 1]")
    epsilon_v = disagreement_risk(victim, source_ds.y, source_ds.X, mode,
                                  weights=source_ds.weights,
                                  num_classes=source_ds.num_classes)
    epsilon_a = disagreement_risk(attacker, target_ds.y, target_ds.X, mode,
                                  weights=target_ds.weights,
                                  num_classes=target_ds.num_classes)
    gap = min(
        disagreement_risk(victim, attacker, source_ds.X, mode,
                          weights=source_ds.weights),
        disagreement_risk(victim, attacker, target_ds.X, mode,
                          weights=target_ds.weights),
    )
    rhs = epsilon_v + 2.0 * tv_value + gap
    return RiskReport(epsilon_v=epsilon_v, epsilon_a=epsilon_a,
                      imitation_gap=gap, tv=tv_value, bound_rhs=rhs,
                      bound_holds=bool(epsilon_a <= rhs + BOUND_SLACK),
                      mode=mode)


@dataclass(frozen=True)
class DefenseBoundReport:
    """Terms of the defended-victim risk bound."""

    epsilon_v_raw: float
    epsilon_v_defended: float
    delta: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "epsilon_v_raw": self.epsilon_v_raw,
            "epsilon_v_defended": self.epsilon_v_defended,
            "delta": self.delta,
            "holds": self.holds,
        }


def defense_bound_report(source_ds: LabeledDataset, victim_raw,
                         victim_defended, mode: str = "hard") -> DefenseBoundReport:
    """Check defended victim risk <= raw victim risk + distortion.

    ``victim_defended`` is typically the stored matrix of defended
    responses, so stochastic defenses are judged on one fixed realization.
    """
    epsilon_raw = disagreement_risk(victim_raw, source_ds.y, source_ds.X, mode,
                                    weights=source_ds.weights,
                                    num_classes=source_ds.num_classes)
    epsilon_def = disagreement_risk(victim_defended, source_ds.y, source_ds.X, mode,
                                    weights=source_ds.weights,
                                    num_classes=source_ds.num_classes)
    delta = disagreement_risk(victim_raw, victim_defended, source_ds.X, mode,
                              weights=source_ds.weights)
    return DefenseBoundReport(
        epsilon_v_raw=epsilon_raw, epsilon_v_defended=epsilon_def, delta=delta,
        holds=bool(epsilon_def <= epsilon_raw + delta + BOUND_SLACK))


def ensemble_diversity(harvest_result, mode: str = "hard") -> float:
    """Mean pairwise disagreement between the victims' responses."""
    K = harvest_result.num_victims
    if K < 2:
        raise ValueError("diversity needs at least 2 victims")
    total, pairs = 0.0, 0
    for a in range(K):
        for b in range(a + 1, K):
            total += disagreement_risk(harvest_result.probs[a],
                                       harvest_result.probs[b],
                                       harvest_result.inputs, mode)
            pairs += 1
    return total / pairs


@dataclass(frozen=True)
class CostReport:
    """API-vs-human annotation cost comparison for one query campaign."""

    n_queries: int
    api_cost: Decimal
    human_cost: Decimal
    ratio: float  # human_cost / api_cost; inf when the API was free

    def to_dict(self) -> dict:
        return {
            "n_queries": self.n_queries,
            "api_cost": str(self.api_cost),
            "human_cost": str(self.human_cost),
            "ratio": "inf" if self.ratio == float("inf") else self.ratio,
        }


def cost_report(n_queries: int, price_per_query,
                human_price_per_label) -> CostReport:
    """Decimal-exact cost arithmetic; a free API yields an infinite ratio."""
    if n_queries < 0:
        raise ValueError("n_queries must be non-negative")
    price = Decimal(str(price_per_query))
    human_price = Decimal(str(human_price_per_label))
    if price < 0 or human_price < 0:
        raise ValueError("prices must be non-negative")
    api_cost = n_queries * price
    human_cost = n_queries * human_price
    ratio = float("inf") if api_cost == 0 else float(human_cost / api_cost)
    return CostReport(n_queries=n_queries, api_cost=api_cost,
                      human_cost=human_cost, ratio=ratio)
