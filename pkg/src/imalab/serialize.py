"""Versioned text serialization for trained models.

Format (UTF-8, line-oriented, diffable):

    IMALAB-MODEL 1 <kind> <input_dim> <num_classes> [<hidden_dim>]
    <param-name> <count> <v0> <v1> ...

Values are 17-significant-digit decimals, which round-trip IEEE doubles
exactly.
"""

from __future__ import annotations

import numpy as np

from .models import MLPSoftmaxClassifier, SoftmaxLinearClassifier

MAGIC = "IMALAB-MODEL"
VERSION = 1

_PARAM_NAMES = {
    "linear": ["coef_", "intercept_"],
    "mlp": ["hidden_coef_", "hidden_intercept_", "out_coef_", "out_intercept_"],
}


class ModelFormatError(Exception):
    """Base class for model (de)serialization failures."""


class VersionMismatchError(ModelFormatError):
    """Header magic or version is not recognized."""


class TruncatedModelError(ModelFormatError):
    """Document ends before all declared parameters are present."""


class DimensionMismatchError(ModelFormatError):
    """Declared dims and parameter counts disagree."""


def _shapes(kind, input_dim, num_classes, hidden_dim):
    if kind == "linear":
        return {"coef_": (num_classes, input_dim), "intercept_": (num_classes,)}
    return {
        "hidden_coef_": (hidden_dim, input_dim),
        "hidden_intercept_": (hidden_dim,),
        "out_coef_": (num_classes, hidden_dim),
        "out_intercept_": (num_classes,),
    }


def serialize_model(model) -> bytes:
    kind = model.kind
    header = [MAGIC, str(VERSION), kind, str(model.input_dim), str(model.num_classes)]
    if kind == "mlp":
        header.append(str(model.hidden_dim))
    lines = [" ".join(header)]
    for name in _PARAM_NAMES[kind]:
        values = np.asarray(getattr(model, name)).ravel()
        lines.append(" ".join([name, str(values.size)]
                              + [format(v, ".17g") for v in values]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_model(data: bytes):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise VersionMismatchError("not a text model document") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TruncatedModelError("empty model document")
    header = lines[0].split()
    if len(header) < 2 or header[0] != MAGIC:
        raise VersionMismatchError(f"bad magic in header: {lines[0]!r}")
    if header[1] != str(VERSION):
        raise VersionMismatchError(f"unsupported format version {header[1]!r}")
    kind = header[2] if len(header) > 2 else ""
    if kind == "linear":
        if len(header) != 5:
            raise DimensionMismatchError("linear header needs input_dim and num_classes")
        input_dim, num_classes = int(header[3]), int(header[4])
        hidden_dim = None
        model = SoftmaxLinearClassifier(input_dim, num_classes)
    elif kind == "mlp":
        if len(header) != 6:
            raise DimensionMismatchError("mlp header needs input_dim, num_classes, hidden_dim")
        input_dim, num_classes, hidden_dim = (int(header[3]), int(header[4]),
                                              int(header[5]))
        model = MLPSoftmaxClassifier(input_dim, num_classes, hidden_dim=hidden_dim)
    else:
        raise VersionMismatchError(f"unknown architecture kind {kind!r}")

    shapes = _shapes(kind, input_dim, num_classes, hidden_dim)
    names = _PARAM_NAMES[kind]
    if len(lines) - 1 < len(names):
        raise TruncatedModelError(
            f"expected {len(names)} parameter lines, found {len(lines) - 1}")
    for name, line in zip(names, lines[1:]):
        fields = line.split()
        if not fields or fields[0] != name:
            raise DimensionMismatchError(f"expected parameter {name!r}, got {line!r}")
        count = int(fields[1])
        shape = shapes[name]
        if count != int(np.prod(shape)):
            raise DimensionMismatchError(
                f"{name}: declared count {count} != expected {int(np.prod(shape))}")
        if len(fields) - 2 < count:
            raise TruncatedModelError(f"{name}: {len(fields) - 2} of {count} values present")
        if len(fields) - 2 > count:
            raise DimensionMismatchError(f"{name}: too many values")
        values = np.array([float(v) for v in fields[2:]], dtype=np.float64)
        setattr(model, name, values.reshape(shape))
    return model


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
