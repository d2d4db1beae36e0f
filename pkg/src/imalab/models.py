"""Trainable softmax classifiers: linear and one-hidden-layer tanh MLP.

Both estimators follow the scikit-learn API (``fit`` / ``predict`` /
``predict_proba`` / ``get_params``) but are implemented in plain numpy so
that gradients are inspectable and training is bit-deterministic under a
seed. ``fit`` accepts either integer labels or full target distributions;
the latter is what imitation training uses for soft labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .data import LabeledDataset

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for one SGD training run.

    Defaults target from-scratch desk-scale models: plain SGD, lr 0.1,
    batch 32, 50 epochs.
    """

    learning_rate: float = 0.1
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    label_mode: str = "soft"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.label_mode not in ("soft", "hard"):
            raise ValueError("label_mode must be 'soft' or 'hard'")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax input must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """-sum(target * log(pred)), with pred clamped to >= 1e-12 before log."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("pred and target must have equal length")
    return float(-(target * np.log(np.maximum(pred, PROB_FLOOR))).sum(axis=-1).mean())


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), num_classes), dtype=np.float64)
    if len(labels):
        out[np.arange(len(labels)), labels] = 1.0
    return out


def _as_targets(targets, num_classes: int) -> np.ndarray:
    targets = np.asarray(targets)
    if targets.ndim == 1:
        return one_hot(targets, num_classes)
    targets = targets.astype(np.float64)
    if targets.shape[1] != num_classes:
        raise ValueError("target distributions have wrong number of classes")
    if np.any(targets < 0) or np.any(np.abs(targets.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("targets must be probability vectors")
    return targets


class _SoftmaxSGDBase(BaseEstimator, ClassifierMixin):
    """Shared shuffled mini-batch SGD loop minimizing mean cross-entropy."""

    def fit(self, X, targets):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(f"expected X of shape (n, {self.input_dim})")
        T = _as_targets(targets, self.num_classes)
        if len(T) != len(X):
            raise ValueError("X and targets must have equal length")
        rng = np.random.default_rng(self.seed)
        self._init_params(rng)
        if self.epochs > 0 and len(X) == 0:
            raise ValueError("cannot train on empty data with epochs > 0")
        n = len(X)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                grads = self._grads(X[idx], T[idx])
                for param, grad in zip(self._params(), grads):
                    param -= self.learning_rate * grad
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        if squeeze:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise ValueError(
                f"input dim {X.shape[1]} != model input dim {self.input_dim}")
        logits = self._forward(X)
        return logits[0] if squeeze else logits

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        # np.argmax breaks ties toward the lowest class index
        return np.argmax(self.predict_proba(X), axis=-1)

    def mean_loss(self, X, targets) -> float:
        X = np.asarray(X, dtype=np.float64)
        T = _as_targets(targets, self.num_classes)
        return cross_entropy(softmax(self._forward(X)), T)


class SoftmaxLinearClassifier(_SoftmaxSGDBase):
    """Multinomial logistic regression trained by plain SGD.

    Parameters are zero-initialized, so an untrained (epochs=0) model
    predicts the uniform distribution on every input.
    """

    kind = "linear"

    def __init__(self, input_dim, num_classes, learning_rate=0.1,
                 batch_size=32, epochs=50, seed=0):
        self.input_dim = input_dim
        self.num_classes = num_classes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def _init_params(self, rng):
        self.coef_ = np.zeros((self.num_classes, self.input_dim))
        self.intercept_ = np.zeros(self.num_classes)

    def _params(self):
        return [self.coef_, self.intercept_]

    def _forward(self, X):
        return X @ self.coef_.T + self.intercept_

    def _grads(self, X, T):
        delta = softmax(self._forward(X)) - T  # (n, C)
        n = len(X)
        return [delta.T @ X / n, delta.mean(axis=0)]


class MLPSoftmaxClassifier(_SoftmaxSGDBase):
    """One-hidden-layer tanh network with a softmax head.

    Weights are initialized uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)),
    from the seeded generator; biases start at zero.
    """

    kind = "mlp"

    def __init__(self, input_dim, num_classes, hidden_dim=16, learning_rate=0.1,
                 batch_size=32, epochs=50, seed=0):
        self.input_dim = input_dim
        self.num_classes = num_classes
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def _init_params(self, rng):
        def glorot(fan_out, fan_in):
            s = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-s, s, size=(fan_out, fan_in))

        self.hidden_coef_ = glorot(self.hidden_dim, self.input_dim)
        self.hidden_intercept_ = np.zeros(self.hidden_dim)
        self.out_coef_ = glorot(self.num_classes, self.hidden_dim)
        self.out_intercept_ = np.zeros(self.num_classes)

    def _params(self):
        return [self.hidden_coef_, self.hidden_intercept_,
                self.out_coef_, self.out_intercept_]

    def _hidden(self, X):
        return np.tanh(X @ self.hidden_coef_.T + self.hidden_intercept_)

    def _forward(self, X):
        return self._hidden(X) @ self.out_coef_.T + self.out_intercept_

    def _grads(self, X, T):
        n = len(X)
        H = self._hidden(X)
        delta = softmax(H @ self.out_coef_.T + self.out_intercept_) - T
        d_hidden = (delta @ self.out_coef_) * (1.0 - H * H)
        return [d_hidden.T @ X / n, d_hidden.mean(axis=0),
                delta.T @ H / n, delta.mean(axis=0)]


def make_model(kind: str, input_dim: int, num_classes: int,
               hidden_dim: int | None = None, cfg: TrainConfig | None = None):
    """Construct an unfitted model of the given kind."""
    cfg = cfg or TrainConfig()
    common = dict(learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
                  epochs=cfg.epochs, seed=cfg.seed)
    if kind == "linear":
        return SoftmaxLinearClassifier(input_dim, num_classes, **common)
    if kind == "mlp":
        return MLPSoftmaxClassifier(input_dim, num_classes,
                                    hidden_dim=hidden_dim or 16, **common)
    raise ValueError(f"unknown model kind: {kind!r}")


def train_model(kind: str, input_dim: int, num_classes: int, X, targets,
                cfg: TrainConfig, hidden_dim: int | None = None):
    """Build and fit a model on (X, targets) under the given config.

    In hard label mode the targets are collapsed to one-hot vectors at
    their argmax before training.
    """
    model = make_model(kind, input_dim, num_classes, hidden_dim, cfg)
    T = _as_targets(targets, num_classes) if len(np.asarray(targets)) else \
        np.zeros((0, num_classes))
    if cfg.label_mode == "hard" and len(T):
        T = one_hot(np.argmax(T, axis=1), num_classes)
    return model.fit(np.asarray(X, dtype=np.float64), T)


def accuracy(model, ds: LabeledDataset) -> float:
    """Fraction of examples whose hard prediction matches the oracle label."""
    if len(ds) == 0:
        raise ValueError("accuracy is undefined on an empty dataset")
    return float(np.mean(model.predict(ds.X) == ds.y))
