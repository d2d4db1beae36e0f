"""Datasets, featurization, synthetic domain-shift generators and splits.

All randomness goes through ``numpy.random.Generator`` seeded with PCG64;
the same (spec, seed) pair always produces the same datasets on the same
build of this package.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

_TOKEN_RE = re.compile(r"[0-9A-Za-z]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(token: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 bytes of ``token``."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def featurize(text: str, dim: int, lowercase: bool = True) -> np.ndarray:
    """Hashed bag-of-words count vector of length ``dim``.

    Tokens are maximal alphanumeric runs; each token increments bucket
    ``fnv1a64(token) % dim``. Hash collisions are accepted.
    """
    if dim < 2:
        raise ValueError(f"featurizer dim must be >= 2, got {dim}")
    if lowercase:
        text = text.lower()
    vec = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text):
        vec[fnv1a64(token) % dim] += 1.0
    return vec


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with oracle labels and a domain tag.

    ``weights`` is an optional probability vector over examples; when set,
    risk functionals treat the dataset as an exact finite distribution
    (one row per support point) instead of an i.i.d. sample.
    """

    X: np.ndarray
    y: np.ndarray
    num_classes: int
    domain_tag: str = "source"
    weights: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError("inputs and labels must have equal length")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if len(y) and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError("every label must be in [0, num_classes)")
        if not np.all(np.isfinite(X)):
            raise ValueError("all feature entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != y.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must be a probability vector over examples")
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class TabularDomainSpec:
    """Discrete domain pair over M one-hot cells with an exact oracle rule.

    Total variation between source and target is exactly computable, which
    makes every risk term enumerable over the support.
    """

    p_source: np.ndarray
    p_target: np.ndarray
    oracle_rule: np.ndarray  # cell index -> class index
    n_source: int
    n_target: int
    num_classes: int

    def __post_init__(self):
        ps = np.asarray(self.p_source, dtype=np.float64)
        pt = np.asarray(self.p_target, dtype=np.float64)
        rule = np.asarray(self.oracle_rule, dtype=np.int64)
        if ps.shape != pt.shape or ps.ndim != 1:
            raise ValueError("p_source and p_target must be equal-length vectors")
        for name, p in (("p_source", ps), ("p_target", pt)):
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must sum to 1 with non-negative entries")
        if rule.shape != ps.shape:
            raise ValueError("oracle_rule must assign a class to every cell")
        if np.any(rule < 0) or np.any(rule >= self.num_classes):
            raise ValueError("oracle_rule classes must be < num_classes")
        if self.n_source < 0 or self.n_target < 0:
            raise ValueError("sample counts must be non-negative")
        object.__setattr__(self, "p_source", ps)
        object.__setattr__(self, "p_target", pt)
        object.__setattr__(self, "oracle_rule", rule)

    @property
    def support_size(self) -> int:
        return len(self.p_source)


@dataclass(frozen=True)
class GaussianDomainSpec:
    """Continuous domain pair: isotropic Gaussian blobs, one per class."""

    dim: int
    num_classes: int
    class_means_source: np.ndarray
    class_means_target: np.ndarray
    noise_std: float
    n_source: int
    n_target: int
    label_noise_rate: float = 0.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if not 0.0 <= self.label_noise_rate < 1.0:
            raise ValueError("label_noise_rate must be in [0, 1)")
        for name in ("class_means_source", "class_means_target"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape != (self.num_classes, self.dim):
                raise ValueError(f"{name} must have shape (num_classes, dim)")
            object.__setattr__(self, name, m)


def generate_tabular_pair(spec: TabularDomainSpec, seed: int):
    """Sample (source, target) datasets of one-hot cell vectors."""
    rng = np.random.default_rng(seed)
    out = []
    for p, n, tag in ((spec.p_source, spec.n_source, "source"),
                      (spec.p_target, spec.n_target, "target")):
        cells = rng.choice(spec.support_size, size=n, p=p)
        X = np.zeros((n, spec.support_size), dtype=np.float64)
        X[np.arange(n), cells] = 1.0
        y = spec.oracle_rule[cells] if n else np.zeros(0, dtype=np.int64)
        out.append(LabeledDataset(X, y, spec.num_classes, tag))
    return out[0], out[1]


def support_dataset(spec: TabularDomainSpec, which: str) -> LabeledDataset:
    """Exact finite-distribution dataset: one row per cell, weighted by mass."""
    if which not in ("source", "target"):
        raise ValueError("which must be 'source' or 'target'")
    p = spec.p_source if which == "source" else spec.p_target
    X = np.eye(spec.support_size, dtype=np.float64)
    return LabeledDataset(X, spec.oracle_rule, spec.num_classes, which, weights=p)


def generate_gaussian_pair(spec: GaussianDomainSpec, seed: int):
    """Sample (source, target) datasets from per-class Gaussian blobs."""
    rng = np.random.default_rng(seed)
    out = []
    for means, n, tag in ((spec.class_means_source, spec.n_source, "source"),
                          (spec.class_means_target, spec.n_target, "target")):
        y = rng.integers(0, spec.num_classes, size=n)
        X = means[y] + rng.normal(0.0, spec.noise_std, size=(n, spec.dim))
        if spec.label_noise_rate > 0 and n:
            flip = rng.random(n) < spec.label_noise_rate
            shift = rng.integers(1, spec.num_classes, size=n)
            y = np.where(flip, (y + shift) % spec.num_classes, y)
        out.append(LabeledDataset(X, y, spec.num_classes, tag))
    return out[0], out[1]


def split(ds: LabeledDataset, fractions, seed: int):
    """Seeded shuffle, then contiguous train/dev/test cut.

    Sizes are floor(fraction * n); leftover examples go to the train part.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative reals")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(ds)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    sizes = [int(np.floor(f * n)) for f in fractions]
    sizes[0] += n - sum(sizes)
    parts = []
    start = 0
    for size in sizes:
        idx = order[start:start + size]
        parts.append(LabeledDataset(ds.X[idx], ds.y[idx], ds.num_classes, ds.domain_tag))
        start += size
    return tuple(parts)


def save_text_csv(path, texts, labels) -> None:
    """Write the `text,label` dataset CSV (RFC 4180 quoting)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["text", "label"])
        for text, label in zip(texts, labels):
            writer.writerow([text, int(label)])


def load_text_csv(path, dim: int, lowercase: bool = True,
                  num_classes: int | None = None,
                  domain_tag: str = "source") -> LabeledDataset:
    """Load a `text,label` CSV and featurize it into a LabeledDataset."""
    rows_x, rows_y = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["text", "label"]:
            raise ValueError(f"{path}: expected header 'text,label'")
        for row in reader:
            if not row:
                continue
            rows_x.append(featurize(row[0], dim, lowercase))
            rows_y.append(int(row[1]))
    y = np.array(rows_y, dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1 if len(y) else 1
    X = np.array(rows_x) if rows_x else np.zeros((0, dim))
    return LabeledDataset(X, y, num_classes, domain_tag)


def save_vector_csv(path, ds: LabeledDataset) -> None:
    """Write a numeric dataset as `f0..f{D-1},label` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(ds.dim)] + ["label"])
        for x, label in zip(ds.X, ds.y):
            writer.writerow([format(v, ".17g") for v in x] + [int(label)])


def load_vector_csv(path, num_classes: int | None = None,
                    domain_tag: str = "source") -> LabeledDataset:
    """Load a `f0..f{D-1},label` CSV written by :func:`save_vector_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise ValueError(f"{path}: expected feature columns plus 'label'")
        dim = len(header) - 1
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            xs.append([float(v) for v in row[:dim]])
            ys.append(int(row[dim]))
    y = np.array(ys, dtype=np.int64)
    if num_classes is None:
        num_classes = int(y.max()) + 1 if len(y) else 1
    X = np.array(xs) if xs else np.zeros((0, dim))
    return LabeledDataset(X, y, num_classes, domain_tag)
