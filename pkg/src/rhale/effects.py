"""Datasets, model handles and instance-level local effects.

A local effect is the partial derivative of the model output with respect to
one feature, evaluated at a data instance. Effects come either from an
analytic gradient supplied with the model or from central finite differences.
"""

from __future__ import annotations

import csv
import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, InputError, ModelError

__all__ = [
    "FeatureMatrix",
    "ModelHandle",
    "LocalEffects",
    "evaluate_model",
    "gradient_matrix",
    "local_effects",
    "local_effects_analytic",
    "local_effects_finite_diff",
    "default_step",
    "read_csv_matrix",
    "write_csv_matrix",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An ``N x D`` matrix of finite reals, one column per feature."""

    values: np.ndarray
    column_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InputError(f"expected a 2-D matrix, got shape {values.shape}")
        n, d = values.shape
        if n < 2:
            raise InputError(f"need at least 2 rows, got {n}")
        if d < 1:
            raise InputError("need at least one feature column")
        bad = ~np.isfinite(values)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise InputError(f"non-finite value at row {row}, column {col}")
        object.__setattr__(self, "values", _frozen(values))
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != d:
                raise InputError(f"{len(names)} column names for {d} columns")
            object.__setattr__(self, "column_names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        if self.column_names is not None:
            return self.column_names
        return tuple(f"x{i + 1}" for i in range(self.n_features))

    def column(self, s: int) -> np.ndarray:
        self.check_feature(s, require_range=False)
        return self.values[:, s]

    def check_feature(self, s: int, require_range: bool = True) -> None:
        """Raise ``InputError`` unless ``s`` indexes a usable feature.

        A feature used for an explanation must not be constant.
        """
        if not isinstance(s, (int, np.integer)) or not 0 <= s < self.n_features:
            raise InputError(f"feature index {s!r} outside [0, {self.n_features})")
        if require_range:
            col = self.values[:, s]
            if not col.min() < col.max():
                raise InputError(f"feature {s} is constant; nothing to explain")

    def fingerprint(self) -> str:
        return hashlib.sha1(self.values.tobytes()).hexdigest()

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        names, values = read_csv_matrix(path)
        return cls(values, tuple(names))

    def to_csv(self, path) -> None:
        write_csv_matrix(path, self.values, self.names)


@dataclass(frozen=True, eq=False)
class ModelHandle:
    """A black-box model: an evaluator and, optionally, its gradient.

    Both callables are batched by default: ``evaluator`` maps an ``(n, D)``
    array to ``n`` outputs and ``gradient`` maps it to an ``(n, D)`` array of
    partial derivatives. Pass ``vectorized=False`` to supply per-row
    callables (``D``-vector to scalar / ``D``-vector) instead.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    n_features: Optional[int] = None
    name: str = "model"
    vectorized: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def has_gradient(self) -> bool:
        return self.gradient is not None

    def _batch(self, fn, points: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return np.asarray(fn(points), dtype=float)
        return np.asarray([fn(row) for row in points], dtype=float)

    def predict(self, points) -> np.ndarray:
        return evaluate_model(self, points)


def _as_points(points) -> np.ndarray:
    if isinstance(points, FeatureMatrix):
        return np.asarray(points.values)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise InputError(f"points must be 2-D, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise InputError("points contain non-finite values")
    return pts


def _check_arity(model: ModelHandle, d: int) -> None:
    if model.n_features is not None and d != model.n_features:
        raise InputError(f"model expects {model.n_features} features, points have {d}")


def evaluate_model(model: ModelHandle, points) -> np.ndarray:
    """Evaluate ``model`` on every row of ``points``."""
    pts = _as_points(points)
    _check_arity(model, pts.shape[1])
    out = model._batch(model.evaluator, pts).reshape(-1)
    if out.shape[0] != pts.shape[0]:
        raise ModelError(f"model returned {out.shape[0]} outputs for {pts.shape[0]} rows")
    bad = ~np.isfinite(out)
    if bad.any():
        raise ModelError(f"model output is non-finite at row {int(np.argmax(bad))}")
    return out


def gradient_matrix(model: ModelHandle, data: FeatureMatrix) -> np.ndarray:
    """Analytic ``(N, D)`` gradients, computed once per (model, dataset)."""
    if not model.has_gradient:
        raise CapabilityError(f"model {model.name!r} has no analytic gradient")
    _check_arity(model, data.n_features)
    key = data.fingerprint()
    with model._lock:
        cached = model._cache.get(key)
    if cached is not None:
        return cached
    grads = model._batch(model.gradient, np.asarray(data.values))
    grads = grads.reshape(data.n_rows, data.n_features)
    bad = ~np.isfinite(grads)
    if bad.any():
        raise ModelError(f"gradient is non-finite at row {int(np.argwhere(bad)[0][0])}")
    grads = _frozen(grads)
    with model._lock:
        model._cache.setdefault(key, grads)
        return model._cache[key]


@dataclass(frozen=True, eq=False)
class LocalEffects:
    """Per-instance derivatives of the model w.r.t. one feature."""

    feature_index: int
    xs: np.ndarray
    effects: np.ndarray
    source: str = "analytic"
    step: Optional[float] = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).reshape(-1)
        fx = np.asarray(self.effects, dtype=float).reshape(-1)
        if xs.shape != fx.shape:
            raise InputError(f"xs has {xs.size} entries but effects has {fx.size}")
        if xs.size < 1:
            raise InputError("no local effects")
        if not (np.isfinite(xs).all() and np.isfinite(fx).all()):
            raise InputError("local effects contain non-finite values")
        if self.source not in ("analytic", "finite_difference", "supplied"):
            raise InputError(f"unknown effect source {self.source!r}")
        object.__setattr__(self, "xs", _frozen(xs))
        object.__setattr__(self, "effects", _frozen(fx))

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def x_min(self) -> float:
        return float(self.xs.min())

    @property
    def x_max(self) -> float:
        return float(self.xs.max())


def local_effects_analytic(model: ModelHandle, data: FeatureMatrix, s: int) -> LocalEffects:
    data.check_feature(s, require_range=False)
    grads = gradient_matrix(model, data)
    return LocalEffects(s, data.values[:, s], grads[:, s], source="analytic")


def default_step(data: FeatureMatrix, s: int) -> float:
    col = data.values[:, s]
    return 1e-5 * float(col.max() - col.min())


def local_effects_finite_diff(
    model: ModelHandle, data: FeatureMatrix, s: int, h: Optional[float] = None
) -> LocalEffects:
    """Central-difference effects ``[f(x + h e_s) - f(x - h e_s)] / 2h``.

    ``h`` defaults to ``1e-5`` times the feature's range.
    """
    data.check_feature(s, require_range=h is None)
    if h is None:
        h = default_step(data, s)
    if not h > 0 or not np.isfinite(h):
        raise InputError(f"finite-difference step must be positive, got {h}")
    up = np.array(data.values)
    down = np.array(data.values)
    up[:, s] += h
    down[:, s] -= h
    fx = (evaluate_model(model, up) - evaluate_model(model, down)) / (2.0 * h)
    return LocalEffects(s, data.values[:, s], fx, source="finite_difference", step=float(h))


def local_effects(model: ModelHandle, data: FeatureMatrix, s: int, method: str = "auto",
                  h: Optional[float] = None) -> LocalEffects:
    """Dispatch to the analytic path when a gradient exists, else finite differences."""
    if method == "auto":
        method = "analytic" if model.has_gradient else "finite_difference"
    if method == "analytic":
        return local_effects_analytic(model, data, s)
    if method == "finite_difference":
        return local_effects_finite_diff(model, data, s, h)
    raise InputError(f"unknown local-effect method {method!r}")


def read_csv_matrix(path) -> tuple[list[str], np.ndarray]:
    """Read a CSV with a header row and one numeric column per feature."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        values = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if values.ndim != 2 or values.shape[1] != len(header):
        raise InputError(f"{path}: rows do not match the {len(header)}-column header")
    return header, values


def write_csv_matrix(path, values: np.ndarray, names: Sequence[str]) -> None:
    values = np.asarray(values, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(names))
        for row in values:
            writer.writerow([repr(float(v)) for v in row])
