"""Comparison methods: PDP, ICE / centered ICE and endpoint-difference ALE."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .binning import assign_bins, fixed_partition
from .effects import FeatureMatrix, ModelHandle, evaluate_model
from .errors import InputError

__all__ = ["GridCurve", "ICEBundle", "default_grid", "pdp", "ice", "ale_classic", "DEFAULT_GRID_POINTS"]

DEFAULT_GRID_POINTS = 101
_CHUNK_ROWS = 1_000_000


@dataclass(frozen=True, eq=False)
class GridCurve:
    """A curve sampled on a strictly increasing grid.

    ``bin_effects`` and ``flags`` are only filled by the binned ALE estimator.
    """

    grid: np.ndarray
    values: np.ndarray
    bin_effects: Optional[np.ndarray] = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise InputError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise InputError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def to_dict(self) -> dict:
        out = {"x": [float(v) for v in self.grid], "y": [float(v) for v in self.values]}
        if self.bin_effects is not None:
            out["bin_effects"] = [float(v) for v in self.bin_effects]
            out["flags"] = list(self.flags)
        return out


@dataclass(frozen=True, eq=False)
class ICEBundle:
    grid: np.ndarray
    curves: np.ndarray
    centered: bool = False

    @property
    def n_curves(self) -> int:
        return self.curves.shape[0]

    def mean(self) -> GridCurve:
        return GridCurve(self.grid, self.curves.mean(axis=0))

    def to_dict(self) -> dict:
        return {"x": [float(v) for v in self.grid], "centered": self.centered,
                "curves": [[float(v) for v in row] for row in self.curves]}


def default_grid(data: FeatureMatrix, s: int, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    col = data.column(s)
    return np.linspace(col.min(), col.max(), points)


def _check_grid(data: FeatureMatrix, s: int, grid) -> np.ndarray:
    data.check_feature(s, require_range=False)
    if grid is None:
        return default_grid(data, s)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    col = data.column(s)
    if grid.size < 1 or not np.isfinite(grid).all():
        raise InputError("grid must hold finite values")
    if grid.min() < col.min() or grid.max() > col.max():
        raise InputError("grid extends beyond the feature's range")
    return grid


def _ice_matrix(model: ModelHandle, data: FeatureMatrix, s: int, grid: np.ndarray) -> np.ndarray:
    # batched calls of every instance at several grid values, in chunks
    n, t = data.n_rows, grid.size
    step = max(1, _CHUNK_ROWS // n)
    out = np.empty((t, n))
    for start in range(0, t, step):
        g = grid[start:start + step]
        points = np.repeat(np.asarray(data.values)[None, :, :], g.size, axis=0)
        points[:, :, s] = g[:, None]
        out[start:start + g.size] = evaluate_model(model, points.reshape(g.size * n, -1)).reshape(g.size, n)
    return out.T


def ice(model: ModelHandle, data: FeatureMatrix, s: int, grid=None,
        center: bool = False) -> ICEBundle:
    """One curve per instance: the model with feature ``s`` swept over ``grid``."""
    grid = _check_grid(data, s, grid)
    curves = _ice_matrix(model, data, s, grid)
    if center:
        curves = curves - curves[:, :1]
    return ICEBundle(grid, curves, center)


def pdp(model: ModelHandle, data: FeatureMatrix, s: int, grid=None) -> GridCurve:
    """Partial dependence: the average of the ICE curves."""
    return ice(model, data, s, grid).mean()


def ale_classic(model: ModelHandle, data: FeatureMatrix, s: int, K: int) -> GridCurve:
    """ALE with ``K`` equal bins and model differences at the bin edges.

    Returned on the bin limits, starting at 0. Empty bins get effect 0 and
    are flagged.
    """
    data.check_feature(s)
    col = data.column(s)
    part = fixed_partition(float(col.min()), float(col.max()), K)
    z = part.limits
    bins = assign_bins(col, part) - 1
    lo = np.array(data.values)
    hi = np.array(data.values)
    lo[:, s] = z[bins]
    hi[:, s] = z[bins + 1]
    diffs = (evaluate_model(model, hi) - evaluate_model(model, lo)) / part.widths[bins]
    counts = np.bincount(bins, minlength=K)
    sums = np.bincount(bins, weights=diffs, minlength=K)
    effects = np.divide(sums, counts, out=np.zeros(K), where=counts > 0)
    flags = tuple(f"bin {k + 1}: empty" for k in np.flatnonzero(counts == 0))
    if flags:
        warnings.warn(f"empty bins set to zero effect: {', '.join(flags)}", stacklevel=2)
    values = np.concatenate(([0.0], np.cumsum(effects * part.widths)))
    return GridCurve(z, values, effects, flags)
