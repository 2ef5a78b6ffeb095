"""Bin statistics, the accumulated effect curve and its heterogeneity envelope."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .binning import (
    BinningConfig,
    Partition,
    assign_bins,
    dp_optimal_partition,
    fixed_partition,
)
from .effects import FeatureMatrix, LocalEffects, ModelHandle, local_effects
from .errors import DegenerateBinError, EmptyBinError, InputError

__all__ = [
    "EffectHistogram",
    "BinStats",
    "EffectResult",
    "DecompositionReport",
    "HeterogeneityWarning",
    "bin_effect",
    "bin_std",
    "compute_bin_stats",
    "accumulate_effect",
    "accumulate_std",
    "decompose_heterogeneity",
    "resolve_partition",
    "rhale",
    "rhale_from_effects",
    "N_HIST_BUCKETS",
]

N_HIST_BUCKETS = 32

Binning = Union[str, int, Partition]


class HeterogeneityWarning(UserWarning):
    """A bin is too sparse for a reliable effect or standard deviation."""


@dataclass(frozen=True)
class EffectHistogram:
    """Distribution summary of the local effects inside one bin."""

    edges: tuple[float, ...]
    counts: tuple[int, ...]
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    @classmethod
    def of(cls, values: np.ndarray, buckets: int = N_HIST_BUCKETS) -> Optional["EffectHistogram"]:
        if values.size == 0:
            return None
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(values, bins=buckets, range=(lo, hi))
        q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        return cls(tuple(float(e) for e in edges), tuple(int(c) for c in counts),
                   float(values.min()), float(q1), float(med), float(q3), float(values.max()))

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "counts": list(self.counts), "min": self.minimum,
                "q1": self.q1, "median": self.median, "q3": self.q3, "max": self.maximum}


def bin_effect(values) -> float:
    """Mean local effect of a bin."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyBinError("bin holds no instances")
    return float(values.mean())


def bin_std(values, mu: Optional[float] = None) -> float:
    """Sample standard deviation (divisor ``n - 1``) of a bin's local effects."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateBinError(f"bin holds {values.size} instance(s); need at least 2")
    if mu is None:
        mu = values.mean()
    return float(np.sqrt(np.sum((values - mu) ** 2) / (values.size - 1)))


@dataclass(frozen=True, eq=False)
class BinStats:
    """Per-bin count, mean effect and standard deviation.

    ``std`` is NaN for bins with fewer than two points and ``mean`` is 0 for
    empty bins; both cases are listed in ``flags``.
    """

    partition: Partition
    counts: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    histograms: Optional[tuple] = None
    flags: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def limits(self) -> np.ndarray:
        return self.partition.limits

    @property
    def widths(self) -> np.ndarray:
        return self.partition.widths

    @property
    def std_filled(self) -> np.ndarray:
        """``std`` with missing values replaced by 0."""
        return np.nan_to_num(self.std, nan=0.0)

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    def to_dict(self) -> dict:
        bins = []
        for k in range(self.K):
            std = float(self.std[k])
            entry = {
                "left": float(self.limits[k]),
                "right": float(self.limits[k + 1]),
                "count": int(self.counts[k]),
                "effect": float(self.mean[k]),
                "std": None if np.isnan(std) else std,
            }
            if self.histograms is not None:
                hist = self.histograms[k]
                entry["histogram"] = None if hist is None else hist.to_dict()
            bins.append(entry)
        return {"bins": bins, "flags": list(self.flags)}


def compute_bin_stats(effects: LocalEffects, partition: Partition,
                      histograms: bool = True, warn: bool = True) -> BinStats:
    """Mean and sample standard deviation of the local effects in each bin."""
    bins = assign_bins(effects.xs, partition) - 1
    K = partition.K
    counts = np.bincount(bins, minlength=K)
    sums = np.bincount(bins, weights=effects.effects, minlength=K)
    mean = np.divide(sums, counts, out=np.zeros(K), where=counts > 0)
    ss = np.bincount(bins, weights=(effects.effects - mean[bins]) ** 2, minlength=K)
    std = np.full(K, np.nan)
    ok = counts >= 2
    std[ok] = np.sqrt(ss[ok] / (counts[ok] - 1))

    flags = []
    for k in np.flatnonzero(counts < 2):
        kind = "empty" if counts[k] == 0 else "single"
        flags.append(f"bin {k + 1}: {kind}")
    if flags and warn:
        warnings.warn(f"sparse bins, effect/std unreliable: {', '.join(flags)}",
                      HeterogeneityWarning, stacklevel=2)

    hists = None
    if histograms:
        order = np.argsort(bins, kind="stable")
        groups = np.split(effects.effects[order], np.cumsum(counts)[:-1])
        hists = tuple(EffectHistogram.of(g) for g in groups)
    for a in (counts, mean, std):
        a.setflags(write=False)
    return BinStats(partition, counts, mean, std, hists, tuple(flags))


def _locate(bins: BinStats, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    z = bins.limits
    if ((x < z[0]) | (x > z[-1]) | ~np.isfinite(x)).any():
        raise InputError(f"x outside the explained range [{z[0]}, {z[-1]}]")
    k = np.minimum(np.searchsorted(z, x, side="right"), bins.K) - 1
    return x, k


def _accumulate(bins: BinStats, x, per_bin: np.ndarray, literal: bool):
    x, k = _locate(bins, x)
    before = np.concatenate(([0.0], np.cumsum(per_bin)))
    if literal:
        return before[k + 1]
    return before[k], k, x


def accumulate_effect(bins: BinStats, x, mode: str = "interpolate"):
    """Accumulated effect at ``x``: whole bins to the left plus the partial bin.

    ``mode="literal"`` instead sums every bin up to and including the one
    containing ``x``, which makes the curve a step function.
    """
    per_bin = bins.mean * bins.widths
    if mode == "literal":
        out = _accumulate(bins, x, per_bin, literal=True)
    elif mode == "interpolate":
        before, k, x = _accumulate(bins, x, per_bin, literal=False)
        out = before + bins.mean[k] * (x - bins.limits[k])
    else:
        raise InputError(f"unknown accumulation mode {mode!r}")
    return float(out) if np.ndim(out) == 0 else out


def accumulate_std(bins: BinStats, x, mode: str = "interpolate"):
    """Heterogeneity envelope ``sqrt(sum_k width_k^2 std_k^2)`` up to ``x``.

    Missing bin standard deviations count as zero.
    """
    var = bins.std_filled ** 2
    per_bin = bins.widths ** 2 * var
    if mode == "literal":
        out = np.sqrt(_accumulate(bins, x, per_bin, literal=True))
    elif mode == "interpolate":
        before, k, x = _accumulate(bins, x, per_bin, literal=False)
        out = np.sqrt(before + (x - bins.limits[k]) ** 2 * var[k])
    else:
        raise InputError(f"unknown accumulation mode {mode!r}")
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class DecompositionReport:
    """Within-bin variance, bin error and total variance per coarse bin.

    All variances use the population (``1/n``) convention, so that
    ``total == within + bin_error`` holds exactly in exact arithmetic.
    """

    coarse: Partition
    fine: Partition
    within: np.ndarray
    bin_error: np.ndarray
    total: np.ndarray
    residuals: tuple


def decompose_heterogeneity(effects: LocalEffects, coarse: Partition,
                            fine: Partition) -> DecompositionReport:
    if not np.isclose(coarse.x_min, fine.x_min) or not np.isclose(coarse.x_max, fine.x_max):
        raise InputError("coarse and fine partitions must span the same range")
    if not fine.refines(coarse):
        raise InputError("fine partition does not refine the coarse one")
    fine_bin = assign_bins(effects.xs, fine) - 1
    counts = np.bincount(fine_bin, minlength=fine.K)
    if (counts == 0).any():
        raise DegenerateBinError(f"fine bin {int(np.argmin(counts)) + 1} is empty")
    fine_mean = np.bincount(fine_bin, weights=effects.effects, minlength=fine.K) / counts
    fine_pop = np.bincount(fine_bin, weights=(effects.effects - fine_mean[fine_bin]) ** 2,
                           minlength=fine.K) / counts
    # map each fine bin to the coarse bin containing its midpoint
    mids = 0.5 * (fine.limits[:-1] + fine.limits[1:])
    parent = assign_bins(mids, coarse) - 1

    within = np.zeros(coarse.K)
    error = np.zeros(coarse.K)
    total = np.zeros(coarse.K)
    residuals = []
    for c in range(coarse.K):
        members = parent == c
        n_f = counts[members]
        n_c = n_f.sum()
        values = effects.effects[parent[fine_bin] == c]
        coarse_mean = values.mean()
        rho = fine_mean[members] - coarse_mean
        within[c] = np.sum(n_f * fine_pop[members]) / n_c
        error[c] = np.sum(n_f * rho ** 2) / n_c
        total[c] = np.mean((values - coarse_mean) ** 2)
        residuals.append(rho)
    return DecompositionReport(coarse, fine, within, error, total, tuple(residuals))


@dataclass(frozen=True, eq=False)
class EffectResult:
    """A feature-effect explanation: partition, bin stats, curve and envelope.

    The curve is piecewise linear with knots at the partition limits; the
    envelope is evaluated exactly from the per-bin standard deviations.
    """

    feature_index: int
    bins: BinStats
    binning: str
    centered: bool = False
    centering_offset: float = 0.0
    objective: Optional[float] = None
    config: Optional[BinningConfig] = None
    feature_name: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def partition(self) -> Partition:
        return self.bins.partition

    def effect(self, x, mode: str = "interpolate"):
        return accumulate_effect(self.bins, x, mode) - self.centering_offset

    def std(self, x, mode: str = "interpolate"):
        return accumulate_std(self.bins, x, mode)

    @property
    def curve_knots(self) -> tuple[np.ndarray, np.ndarray]:
        z = self.partition.limits
        return z, np.asarray(self.effect(z))

    @property
    def envelope_knots(self) -> tuple[np.ndarray, np.ndarray]:
        z = self.partition.limits
        return z, np.asarray(self.std(z))

    def to_dict(self) -> dict:
        zc, yc = self.curve_knots
        _, ys = self.envelope_knots
        cfg = self.config
        return {
            "feature_index": int(self.feature_index),
            "feature_name": self.feature_name,
            "binning": self.binning,
            "config": None if cfg is None else {
                "k_max": cfg.k_max, "alpha": cfg.alpha, "n_ppb": cfg.n_ppb},
            "objective": self.objective,
            "centered": self.centered,
            "centering_offset": self.centering_offset,
            "partition": [float(z) for z in self.partition.limits],
            **self.bins.to_dict(),
            "curve": {"x": [float(v) for v in zc], "y": [float(v) for v in yc]},
            "envelope": {"x": [float(v) for v in zc], "y": [float(v) for v in ys]},
        }


def resolve_partition(effects: LocalEffects, binning: Binning, config: BinningConfig,
                      n_total: Optional[int] = None) -> tuple[Partition, str, Optional[float]]:
    """Turn a binning request into a concrete partition.

    ``binning`` is ``"auto"``, ``"fixed:K"``, an integer ``K`` or a
    ``Partition``.
    """
    if isinstance(binning, Partition):
        return binning, "given", None
    if isinstance(binning, str) and binning.startswith("fixed:"):
        try:
            binning = int(binning.split(":", 1)[1])
        except ValueError as exc:
            raise InputError(f"bad fixed binning {binning!r}") from exc
    if isinstance(binning, (int, np.integer)) and not isinstance(binning, bool):
        return fixed_partition(effects.x_min, effects.x_max, int(binning)), f"fixed:{int(binning)}", None
    if binning == "auto":
        partition, objective = dp_optimal_partition(effects, config, n_total)
        return partition, "auto", objective
    raise InputError(f"unknown binning {binning!r}")


def rhale_from_effects(effects: LocalEffects, config: BinningConfig = BinningConfig(),
                       binning: Binning = "auto", center: bool = False,
                       n_total: Optional[int] = None, feature_name: Optional[str] = None,
                       histograms: bool = True, warn: bool = True) -> EffectResult:
    """Explain one feature from precomputed local effects.

    ``warn=False`` drops the sparse-bin warning; the flags stay on the result.
    """
    if not effects.x_min < effects.x_max:
        raise InputError(f"feature {effects.feature_index} is constant; nothing to explain")
    partition, label, objective = resolve_partition(effects, binning, config, n_total)
    bins = compute_bin_stats(effects, partition, histograms=histograms, warn=warn)
    offset = 0.0
    if center:
        offset = float(np.mean(accumulate_effect(bins, effects.xs)))
    return EffectResult(effects.feature_index, bins, label, center, offset, objective,
                        config, feature_name)


def rhale(data: FeatureMatrix, model: ModelHandle, s: int,
          config: BinningConfig = BinningConfig(), binning: Binning = "auto",
          center: bool = False, method: str = "auto") -> EffectResult:
    """Robust heterogeneity-aware accumulated local effect of feature ``s``.

    Parameters
    ----------
    data : FeatureMatrix
        The instances to explain.
    model : ModelHandle
        The black box; its analytic gradient is used when present.
    s : int
        Index of the feature of interest.
    config : BinningConfig
        Settings of the automatic bin splitting.
    binning : {"auto", int, "fixed:K", Partition}
        Automatic variable-width bins, ``K`` equal-width bins or a given
        partition.
    center : bool
        Shift the curve so that its mean over the data is zero.
    method : {"auto", "analytic", "finite_difference"}
        How the local effects are obtained.
    """
    data.check_feature(s)
    effects = local_effects(model, data, s, method)
    return rhale_from_effects(effects, config, binning, center, data.n_rows, data.names[s])
