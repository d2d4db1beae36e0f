"""Black-box victim facade: defended predictions plus query metering.

The endpoint is shaped like a remote API (request in, response out, no
parameter access) so callers never depend on the model internals. It is a
single-owner stateful object: the meter and the defense RNG mutate on every
successful query, so concurrent use requires external serialization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

import numpy as np

PROB_MIN = 1e-6

DEFENSE_MODES = ("none", "hard_label", "gaussian", "gaussian_label_preserving")


@dataclass(frozen=True)
class DefensePolicy:
    """Output-perturbation policy applied to every answered query."""

    mode: str = "none"
    sigma: float = 0.0
    delta: float | None = None  # advisory distortion budget, audited not enforced
    max_resamples: int = 100

    def __post_init__(self):
        if self.mode not in DEFENSE_MODES:
            raise ValueError(f"unknown defense mode {self.mode!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be positive")


@dataclass(frozen=True)
class Meter:
    """Query counter with decimal-exact cost accounting."""

    query_count: int = 0
    price_per_query: Decimal = Decimal("0")

    @property
    def total_cost(self) -> Decimal:
        return self.query_count * self.price_per_query


@dataclass(frozen=True)
class APIResponse:
    probs: np.ndarray
    hard: int


def _one_hot_argmax(probs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(probs)
    out[int(np.argmax(probs))] = 1.0
    return out


def apply_defense(policy: DefensePolicy, probs: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Perturb a probability vector according to the policy.

    Gaussian modes add i.i.d. N(0, sigma^2) per entry, clamp entries to
    [1e-6, 1] and renormalize; the label-preserving variant redraws until
    the argmax is unchanged, falling back to the undefended vector after
    max_resamples draws.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a probability vector")
    if policy.mode == "none" or (policy.sigma == 0.0 and policy.mode != "hard_label"):
        return probs.copy()
    if policy.mode == "hard_label":
        return _one_hot_argmax(probs)

    def noisy():
        perturbed = probs + rng.normal(0.0, policy.sigma, size=probs.shape)
        perturbed = np.clip(perturbed, PROB_MIN, 1.0)
        return perturbed / perturbed.sum()

    if policy.mode == "gaussian":
        return noisy()
    # gaussian_label_preserving
    original = int(np.argmax(probs))
    for _ in range(policy.max_resamples):
        candidate = noisy()
        if int(np.argmax(candidate)) == original:
            return candidate
    return probs.copy()


class VictimEndpoint:
    """Metered, defense-equipped query facade over one trained model."""

    def __init__(self, model, policy: DefensePolicy | None = None,
                 price_per_query: Decimal | str | int = 0, seed: int = 0):
        self.model = model
        self.policy = policy or DefensePolicy()
        self._meter = Meter(0, Decimal(str(price_per_query)))
        self._rng = np.random.default_rng(seed)
        self._distortion_sum = 0.0

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    @property
    def num_classes(self) -> int:
        return self.model.num_classes

    def query(self, x: np.ndarray) -> APIResponse:
        """Answer one query; rejected (malformed) queries are not billed."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.model.input_dim:
            raise ValueError(
                f"query dim {x.shape} does not match model input dim "
                f"{self.model.input_dim}")
        raw = self.model.predict_proba(x)
        defended = apply_defense(self.policy, raw, self._rng)
        if self.policy.delta is not None:
            self._distortion_sum += 0.5 * float(np.abs(defended - raw).sum())
        self._meter = replace(self._meter, query_count=self._meter.query_count + 1)
        return APIResponse(probs=defended, hard=int(np.argmax(defended)))

    def usage(self) -> Meter:
        """Snapshot of the current meter."""
        return self._meter

    @property
    def mean_distortion(self) -> float:
        """Running mean half-L1 distortion; only tracked when delta is set."""
        if self._meter.query_count == 0:
            return 0.0
        return self._distortion_sum / self._meter.query_count
