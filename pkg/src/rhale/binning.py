"""Bin partitions of a feature axis.

Three ways to split ``[x_min, x_max]``: equal-width bins, the variable-width
partition that minimises the discounted heterogeneity objective

    L = sum_k (1 - alpha * |S_k| / N) * var_k * width_k

by dynamic programming over a grid of ``k_max`` cells, and an exhaustive
enumeration of the same grid used as a verification oracle.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .effects import LocalEffects
from .errors import CapabilityError, InfeasibleError, InputError

__all__ = [
    "Partition",
    "BinningConfig",
    "DPTables",
    "fixed_partition",
    "assign_bins",
    "grid_cells",
    "bin_cost",
    "bin_cost_matrix",
    "solve_dp",
    "dp_optimal_partition",
    "brute_force_partition",
    "partition_objective",
    "BRUTE_FORCE_MAX_K",
]

BRUTE_FORCE_MAX_K = 16


@dataclass(frozen=True, eq=False)
class Partition:
    """Strictly increasing bin limits ``z_0 < z_1 < ... < z_K``."""

    limits: np.ndarray

    def __post_init__(self):
        z = np.array(self.limits, dtype=float).reshape(-1)
        if z.size < 2:
            raise InputError("a partition needs at least two limits")
        if not np.isfinite(z).all():
            raise InputError("partition limits must be finite")
        if not (np.diff(z) > 0).all():
            raise InputError("partition limits must be strictly increasing")
        z.setflags(write=False)
        object.__setattr__(self, "limits", z)

    @property
    def K(self) -> int:
        return self.limits.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.limits)

    @property
    def x_min(self) -> float:
        return float(self.limits[0])

    @property
    def x_max(self) -> float:
        return float(self.limits[-1])

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.limits, other.limits)

    def __hash__(self):
        return hash(self.limits.tobytes())

    def __len__(self):
        return self.K

    def refines(self, coarse: "Partition", rtol: float = 1e-12) -> bool:
        """True when every limit of ``coarse`` is also a limit of ``self``."""
        scale = max(abs(self.x_min), abs(self.x_max), self.x_max - self.x_min)
        atol = rtol * scale
        return all(np.isclose(self.limits, z, rtol=0, atol=atol).any() for z in coarse.limits)

    def to_json(self) -> str:
        return json.dumps([float(z) for z in self.limits])

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        try:
            limits = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"partition is not valid JSON: {exc}") from exc
        if not isinstance(limits, list) or not all(isinstance(v, (int, float)) for v in limits):
            raise InputError("partition JSON must be an array of numbers")
        return cls(np.asarray(limits, dtype=float))


@dataclass(frozen=True)
class BinningConfig:
    """Hyper-parameters of the automatic bin splitting.

    ``n_ppb=None`` means ``max(2, ceil(N / 20))``; any explicit value is
    clamped to at least 2 because a one-point bin has no sample variance.
    """

    k_max: int = 50
    alpha: float = 0.2
    n_ppb: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.k_max, (int, np.integer)) or self.k_max < 1:
            raise InputError(f"k_max must be a positive integer, got {self.k_max!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.n_ppb is not None and (not isinstance(self.n_ppb, (int, np.integer)) or self.n_ppb < 1):
            raise InputError(f"n_ppb must be a positive integer, got {self.n_ppb!r}")

    def points_per_bin(self, n_total: int) -> int:
        if self.n_ppb is None:
            return max(2, math.ceil(n_total / 20))
        return max(2, int(self.n_ppb))


@dataclass(frozen=True, eq=False)
class DPTables:
    """Cost table ``cost[i, j]`` (best cost with limit ``i`` at grid point ``j``)
    and the back-pointer table ``back[i, j]``."""

    cost: np.ndarray
    back: np.ndarray


def fixed_partition(x_min: float, x_max: float, K: int) -> Partition:
    """``K`` equal-width bins over ``[x_min, x_max]``."""
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise InputError(f"number of bins must be a positive integer, got {K!r}")
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or not x_min < x_max:
        raise InputError(f"degenerate range [{x_min}, {x_max}]")
    k = np.arange(K + 1, dtype=float)
    limits = x_min + k * (x_max - x_min) / K
    limits[-1] = x_max
    return Partition(limits)


def assign_bins(xs, partition: Partition) -> np.ndarray:
    """1-based bin index of each value: bin ``k`` holds ``z_{k-1} <= x < z_k``.

    The last bin is closed, so ``x = z_K`` lands in bin ``K``.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1)
    z = partition.limits
    outside = (xs < z[0]) | (xs > z[-1]) | ~np.isfinite(xs)
    if outside.any():
        row = int(np.argmax(outside))
        raise InputError(f"row {row}: value {xs[row]!r} outside [{z[0]}, {z[-1]}]")
    idx = np.searchsorted(z, xs, side="right")
    return np.minimum(idx, partition.K)


def grid_cells(effects: LocalEffects, k_max: int) -> tuple[Partition, np.ndarray]:
    """The ``k_max``-cell grid over the effects' range and each point's 0-based cell."""
    grid = fixed_partition(effects.x_min, effects.x_max, k_max)
    return grid, assign_bins(effects.xs, grid) - 1


def _validate_grid_pair(l: int, j: int, k_max: int) -> None:
    if not (0 <= l < j <= k_max):
        raise InputError(f"need 0 <= l < j <= k_max, got l={l}, j={j}, k_max={k_max}")


def _direct_cost(values, cells, z, l, j, config, n_total) -> float:
    inside = values[(cells >= l) & (cells < j)]
    n = inside.size
    if n < config.points_per_bin(n_total):
        return math.inf
    var = float(np.var(inside, ddof=1))
    tau = 1.0 - config.alpha * n / n_total
    return tau * var * float(z[j] - z[l])


def bin_cost(effects: LocalEffects, l: int, j: int, config: BinningConfig,
             n_total: Optional[int] = None) -> float:
    """Discounted cost of the grid bin ``[x_l, x_j)``.

    Computed directly from the raw effects (two-pass sample variance). Returns
    ``inf`` when the bin holds fewer than ``n_ppb`` points.
    """
    _validate_grid_pair(l, j, config.k_max)
    n_total = effects.n if n_total is None else n_total
    grid, cells = grid_cells(effects, config.k_max)
    return _direct_cost(effects.effects, cells, grid.limits, l, j, config, n_total)


def bin_cost_matrix(effects: LocalEffects, config: BinningConfig,
                    n_total: Optional[int] = None) -> np.ndarray:
    """All bin costs ``B[l, j]`` on the grid, in ``O(k_max^2)`` merges.

    Per-cell counts, means and centred sums of squares are merged left to
    right with the pairwise update of Chan et al., which stays accurate when
    the effects have a large mean. ``B[j, j] = 0`` encodes a zero-width bin;
    ``B[l, j] = inf`` for ``l > j`` and for bins with too few points.
    """
    k = config.k_max
    n_total = effects.n if n_total is None else n_total
    n_ppb = config.points_per_bin(n_total)
    grid, cells = grid_cells(effects, k)
    counts = np.bincount(cells, minlength=k).astype(float)
    sums = np.bincount(cells, weights=effects.effects, minlength=k)
    means = np.divide(sums, counts, out=np.zeros(k), where=counts > 0)
    m2 = np.bincount(cells, weights=(effects.effects - means[cells]) ** 2, minlength=k)
    z = grid.limits

    cost = np.full((k + 1, k + 1), np.inf)
    np.fill_diagonal(cost, 0.0)
    for l in range(k):
        n, mean, ss = 0.0, 0.0, 0.0
        for j in range(l + 1, k + 1):
            nb = counts[j - 1]
            if nb > 0:
                tot = n + nb
                delta = means[j - 1] - mean
                mean += delta * nb / tot
                ss += m2[j - 1] + delta * delta * n * nb / tot
                n = tot
            if n >= n_ppb:
                tau = 1.0 - config.alpha * n / n_total
                cost[l, j] = tau * (ss / (n - 1)) * (z[j] - z[l])
    return cost


def solve_dp(cost: np.ndarray) -> DPTables:
    """Fill the DP tables for a ``(k+1) x (k+1)`` bin-cost matrix.

    ``T[0, j] = B[0, j]`` (first bin ``[x_0, x_j)``) and
    ``T[i, j] = min_l T[i-1, l] + B[l, j]``. Zero-width steps cost nothing, so
    ``T[k, k]`` is the optimum over every partition with at most ``k`` bins.
    Ties go to the smallest ``l``, i.e. the widest final bin.
    """
    k = cost.shape[0] - 1
    table = np.full((k + 1, k + 1), np.inf)
    back = np.zeros((k + 1, k + 1), dtype=np.int64)
    table[0] = cost[0]
    for i in range(1, k + 1):
        cand = table[i - 1][:, None] + cost
        back[i] = np.argmin(cand, axis=0)
        table[i] = cand[back[i], np.arange(k + 1)]
    return DPTables(table, back)


def _backtrack(tables: DPTables) -> list[int]:
    k = tables.cost.shape[0] - 1
    j = k
    path = [k]
    for i in range(k, 0, -1):
        j = int(tables.back[i, j])
        path.append(j)
    path.append(0)
    return sorted(set(path))


def partition_objective(effects: LocalEffects, indices, config: BinningConfig,
                        n_total: Optional[int] = None) -> float:
    """Objective of a grid partition given by its limit indices, summed left to right."""
    n_total = effects.n if n_total is None else n_total
    grid, cells = grid_cells(effects, config.k_max)
    total = 0.0
    for l, j in zip(indices[:-1], indices[1:]):
        _validate_grid_pair(int(l), int(j), config.k_max)
        total += _direct_cost(effects.effects, cells, grid.limits, int(l), int(j), config, n_total)
    return total


def _check_feasible(effects: LocalEffects, config: BinningConfig, n_total: int) -> None:
    n_ppb = config.points_per_bin(n_total)
    if effects.n < n_ppb:
        raise InfeasibleError(
            f"{effects.n} points cannot fill even one bin of n_ppb={n_ppb}")
    if not effects.x_min < effects.x_max:
        raise InputError("feature is constant; nothing to partition")


def dp_optimal_partition(effects: LocalEffects, config: BinningConfig = BinningConfig(),
                         n_total: Optional[int] = None, return_indices: bool = False):
    """Optimal variable-width partition of the effects' range.

    Parameters
    ----------
    effects : LocalEffects
        Instance-level effects of one feature.
    config : BinningConfig
        Grid resolution ``k_max``, discount ``alpha`` and minimum points per
        bin.
    n_total : int, optional
        Dataset size used in the discount and the default ``n_ppb``. Defaults
        to the number of effects.
    return_indices : bool
        Also return the chosen grid indices.

    Returns
    -------
    (Partition, float)
        The partition and its objective, recomputed bin by bin from the raw
        effects rather than read off the DP table.
    """
    n_total = effects.n if n_total is None else n_total
    _check_feasible(effects, config, n_total)
    tables = solve_dp(bin_cost_matrix(effects, config, n_total))
    k = config.k_max
    if not np.isfinite(tables.cost[k, k]):
        raise InfeasibleError("no partition satisfies the minimum points per bin")
    indices = _backtrack(tables)
    grid = fixed_partition(effects.x_min, effects.x_max, k)
    partition = Partition(grid.limits[indices])
    objective = partition_objective(effects, indices, config, n_total)
    if return_indices:
        return partition, objective, indices
    return partition, objective


def brute_force_partition(effects: LocalEffects, config: BinningConfig = BinningConfig(),
                          n_total: Optional[int] = None, return_indices: bool = False):
    """Exhaustive minimum of the same objective over all grid partitions.

    Enumerates the ``2**(k_max - 1)`` subsets of interior grid points in order
    of increasing size, so among tied optima the one with fewest bins wins.
    """
    k = config.k_max
    if k > BRUTE_FORCE_MAX_K:
        raise CapabilityError(f"brute force limited to k_max <= {BRUTE_FORCE_MAX_K}, got {k}")
    n_total = effects.n if n_total is None else n_total
    _check_feasible(effects, config, n_total)
    grid, cells = grid_cells(effects, k)
    cost = {(l, j): _direct_cost(effects.effects, cells, grid.limits, l, j, config, n_total)
            for l in range(k) for j in range(l + 1, k + 1)}
    best, best_idx = math.inf, None
    for r in range(k):
        for interior in itertools.combinations(range(1, k), r):
            idx = (0, *interior, k)
            total = 0.0
            for l, j in zip(idx[:-1], idx[1:]):
                total += cost[l, j]
                if total == math.inf:
                    break
            if total < best:
                best, best_idx = total, idx
    if best_idx is None:
        raise InfeasibleError("no partition satisfies the minimum points per bin")
    partition = Partition(grid.limits[list(best_idx)])
    if return_indices:
        return partition, best, list(best_idx)
    return partition, best
