"""Seeded synthetic datasets with known effects, plus a dense reference oracle."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .binning import Partition, fixed_partition
from .effects import FeatureMatrix, LocalEffects, ModelHandle, gradient_matrix
from .errors import CapabilityError, InfeasibleError, InputError
from .estimator import BinStats, accumulate_effect, compute_bin_stats

__all__ = [
    "EXAMPLES",
    "ALIASES",
    "GeneratorSpec",
    "Sample",
    "GroundTruth",
    "generate",
    "make_model",
    "ground_truth",
    "feature_support",
    "dense_oracle",
    "aggregate_dense",
    "PIECEWISE_BREAKS",
    "PIECEWISE_SLOPES",
]

EXAMPLES = ("concept", "running", "simulation", "piecewise", "nonlinear")

# named variants of the simulation study
ALIASES = {
    "simulation-a": ("simulation", dict(alpha=0.0, a1=1.0, a2=1.0)),
    "simulation-b": ("simulation", dict(alpha=0.0, a1=2.0, a2=0.5)),
    "simulation-c": ("simulation", dict(alpha=1.0, a1=1.0, a2=1.0)),
}

PIECEWISE_BREAKS = np.array([0.0, 0.2, 0.4, 0.45, 0.5, 1.0])
PIECEWISE_SLOPES = np.array([2.0, -2.0, 5.0, -10.0, 0.5])

RUNNING_X2_STD = 2.0
RUNNING_X3_STD = 0.01
SIM_NOISE_STD = 0.1
SIM_X3_STD = 0.5
BENCH_X2_VAR = 0.5


@dataclass(frozen=True)
class GeneratorSpec:
    """Which example to draw, how many rows and from which seed.

    ``alpha``, ``a1`` and ``a2`` only matter for the simulation example.
    """

    example: str
    n: int = 1000
    seed: int = 0
    alpha: float = 0.0
    a1: float = 1.0
    a2: float = 1.0

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise InputError(f"unknown example {self.example!r}; choose from {', '.join(EXAMPLES)}")
        if int(self.n) != self.n or self.n < 2:
            raise InputError(f"need n >= 2 samples, got {self.n}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError("seed must fit in 64 unsigned bits")
        if self.example == "simulation" and not self.a1 + self.a2 > 0:
            raise InputError("simulation weights must have a positive sum")

    @classmethod
    def named(cls, name: str, n: int = 1000, seed: int = 0) -> "GeneratorSpec":
        """Build a spec from an example name or one of ``ALIASES``."""
        if name in ALIASES:
            example, params = ALIASES[name]
            return cls(example, n, seed, **params)
        return cls(name, n, seed)

    @property
    def label(self) -> str:
        if self.example != "simulation":
            return self.example
        for alias, (_, params) in ALIASES.items():
            if params == dict(alpha=self.alpha, a1=self.a1, a2=self.a2):
                return alias
        return f"simulation(alpha={self.alpha}, a1={self.a1}, a2={self.a2})"

    @property
    def n_features(self) -> int:
        return 2 if self.example in ("piecewise", "nonlinear") else 3

    def to_dict(self) -> dict:
        return {"example": self.example, "label": self.label, "n": int(self.n), "seed": int(self.seed),
                "alpha": self.alpha, "a1": self.a1, "a2": self.a2}


class Sample(NamedTuple):
    data: FeatureMatrix
    model: ModelHandle
    target: np.ndarray


# ---- models -------------------------------------------------------------

def _concept_model() -> ModelHandle:
    def f(x):
        return 0.2 * x[:, 0] - 5 * x[:, 1] + 10 * x[:, 1] * (x[:, 2] > 0)

    def grad(x):
        g = np.zeros_like(x)
        g[:, 0] = 0.2
        g[:, 1] = -5 + 10 * (x[:, 2] > 0)
        return g

    return ModelHandle(f, grad, 3, "concept")


def _running_model() -> ModelHandle:
    def switch(x):
        return (x[:, 0] < 0).astype(float) - 2.0 * (x[:, 2] < 0)

    def f(x):
        return np.sin(2 * np.pi * x[:, 0]) * switch(x) + x[:, 0] * x[:, 1] + x[:, 1]

    def grad(x):
        g = np.zeros_like(x)
        g[:, 0] = 2 * np.pi * np.cos(2 * np.pi * x[:, 0]) * switch(x) + x[:, 1]
        g[:, 1] = x[:, 0] + 1
        return g

    return ModelHandle(f, grad, 3, "running")


def _simulation_model(alpha: float, a1: float, a2: float) -> ModelHandle:
    def sign(x):
        f1 = a1 * x[:, 0] + a2 * x[:, 1]
        return (f1 <= 0.5).astype(float) - ((f1 > 0.5) & (f1 < 1))

    def f(x):
        f1 = a1 * x[:, 0] + a2 * x[:, 1]
        return (alpha * x[:, 0] * x[:, 2] + f1 * (f1 <= 0.5)
                + (1 - f1) * ((f1 > 0.5) & (f1 < 1)))

    def grad(x):
        g = np.empty_like(x)
        s = sign(x)
        g[:, 0] = alpha * x[:, 2] + a1 * s
        g[:, 1] = a2 * s
        g[:, 2] = alpha * x[:, 0]
        return g

    return ModelHandle(f, grad, 3, "simulation")


def _piecewise_offsets() -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(PIECEWISE_SLOPES * np.diff(PIECEWISE_BREAKS))))


def _piecewise_slope(x1: np.ndarray) -> np.ndarray:
    k = np.clip(np.searchsorted(PIECEWISE_BREAKS, x1, side="right") - 1, 0, len(PIECEWISE_SLOPES) - 1)
    return PIECEWISE_SLOPES[k]


def _piecewise_main(x1: np.ndarray) -> np.ndarray:
    # continuous piecewise-linear function with the prescribed slopes
    k = np.clip(np.searchsorted(PIECEWISE_BREAKS, x1, side="right") - 1, 0, len(PIECEWISE_SLOPES) - 1)
    return _piecewise_offsets()[k] + PIECEWISE_SLOPES[k] * (x1 - PIECEWISE_BREAKS[k])


def _piecewise_model() -> ModelHandle:
    def f(x):
        return _piecewise_main(x[:, 0]) + x[:, 0] * x[:, 1]

    def grad(x):
        return np.column_stack([_piecewise_slope(x[:, 0]) + x[:, 1], x[:, 0]])

    return ModelHandle(f, grad, 2, "piecewise")


def _nonlinear_model() -> ModelHandle:
    def f(x):
        return 4 * x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 0] * x[:, 1]

    def grad(x):
        return np.column_stack([8 * x[:, 0] + x[:, 1], 2 * x[:, 1] + x[:, 0]])

    return ModelHandle(f, grad, 2, "nonlinear")


def make_model(spec: GeneratorSpec) -> ModelHandle:
    if spec.example == "concept":
        return _concept_model()
    if spec.example == "running":
        return _running_model()
    if spec.example == "simulation":
        return _simulation_model(spec.alpha, spec.a1, spec.a2)
    if spec.example == "piecewise":
        return _piecewise_model()
    return _nonlinear_model()


# ---- sampling -----------------------------------------------------------

def _draw(spec: GeneratorSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = int(spec.n)
    noise = np.zeros(n)
    if spec.example == "concept":
        x = rng.uniform(-1, 1, size=(n, 3))
        noise = rng.standard_normal(n)
    elif spec.example == "running":
        left = rng.random(n) < 5 / 6
        x1 = np.where(left, rng.uniform(-0.5, 0, n), rng.uniform(0, 0.5, n))
        x2 = rng.normal(0, RUNNING_X2_STD, n)
        x3 = rng.normal(x1, RUNNING_X3_STD)
        x = np.column_stack([x1, x2, x3])
    elif spec.example == "simulation":
        x1 = rng.uniform(0, 1, n)
        x2 = x1 + rng.normal(0, SIM_NOISE_STD, n)
        x3 = rng.normal(0, SIM_X3_STD, n)
        x = np.column_stack([x1, x2, x3])
    else:
        x1 = rng.uniform(0, 1, n)
        x2 = rng.normal(x1, np.sqrt(BENCH_X2_VAR))
        x = np.column_stack([x1, x2])
    return x, noise


def generate(spec: GeneratorSpec) -> Sample:
    """Draw ``spec.n`` rows; the same spec always yields the same arrays.

    ``target`` is the model output plus any observation noise of the example.
    """
    rng = np.random.default_rng(int(spec.seed))
    x, noise = _draw(spec, rng)
    names = tuple(f"x{i + 1}" for i in range(x.shape[1]))
    data = FeatureMatrix(x, names)
    model = make_model(spec)
    return Sample(data, model, model.predict(data) + noise)


# ---- ground truth -------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    """Known effect curve (anchored at the support's left end) and std."""

    effect: Callable[[np.ndarray], np.ndarray]
    heterogeneity: Callable[[np.ndarray], np.ndarray]
    source: str
    support: tuple[float, float]

    def to_dict(self, points: int = 101) -> dict:
        x = np.linspace(*self.support, points)
        return {"source": self.source, "support": list(self.support),
                "x": [float(v) for v in x],
                "effect": [float(v) for v in self.effect(x)],
                "heterogeneity": [float(v) for v in self.heterogeneity(x)]}


def _const(c: float):
    return lambda x: np.full(np.shape(x), float(c))


def _tent(slope: float, b1: float):
    # rises with ``slope`` until b1, falls back to 0 at 2*b1, then flat
    def effect(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= b1, slope * x, np.where(x < 2 * b1, slope * (2 * b1 - x), 0.0))
    return effect


def feature_support(spec: GeneratorSpec, s: int) -> Optional[tuple[float, float]]:
    """Bounded support of feature ``s``, or None if it is unbounded."""
    if not 0 <= s < spec.n_features:
        raise InputError(f"feature {s} out of range for {spec.example}")
    if spec.example == "concept":
        return (-1.0, 1.0)
    if s == 0:
        return (-0.5, 0.5) if spec.example == "running" else (0.0, 1.0)
    return None


def ground_truth(spec: GeneratorSpec, s: int, n_dense: int = 100_000,
                 k_dense: int = 200) -> GroundTruth:
    """Closed-form effect and heterogeneity for feature ``s`` of an example.

    The nonlinear example's truth comes from the dense oracle instead, drawn
    with ``n_dense`` rows and ``k_dense`` bins.
    """
    support = feature_support(spec, s)
    ex = spec.example
    if ex == "concept":
        slope = (0.2, 0.0, 0.0)[s]
        return GroundTruth(lambda x: slope * (np.asarray(x) + 1.0), _const((0.0, 5.0, 0.0)[s]),
                           "closed_form", support)
    if ex == "running" and s == 0:
        def effect(x):
            x = np.asarray(x, dtype=float)
            return -np.sin(2 * np.pi * x) * (x < 0)
        return GroundTruth(effect, _const(RUNNING_X2_STD), "closed_form", support)
    if ex == "simulation":
        b1 = 1.0 / (2 * (spec.a1 + spec.a2))
        if s in (0, 1) and spec.a1 > 0 and spec.a2 > 0:
            slope = spec.a1 if s == 0 else spec.a2
            sigma = spec.alpha * SIM_X3_STD if s == 0 else 0.0
            return GroundTruth(_tent(slope, b1), _const(sigma), "closed_form",
                               support or (0.0, 1.0))
        if s == 2:
            # x1 ~ U(0, 1): mean 1/2, std 1/sqrt(12)
            lo = -3 * SIM_X3_STD
            return GroundTruth(lambda x: 0.5 * spec.alpha * (np.asarray(x) - lo),
                               _const(spec.alpha / np.sqrt(12.0)), "closed_form",
                               (lo, -lo))
    if ex == "piecewise" and s == 0:
        def effect(x):
            x = np.asarray(x, dtype=float)
            return _piecewise_main(x) + 0.5 * x ** 2
        return GroundTruth(effect, _const(np.sqrt(BENCH_X2_VAR)), "closed_form", support)
    if ex == "nonlinear" and s == 0:
        dense = dense_oracle(spec, n_dense, k_dense, s)
        z = dense.limits

        def effect(x):
            return accumulate_effect(dense, np.clip(x, z[0], z[-1]))

        def sigma(x):
            k = np.clip(np.searchsorted(z, x, side="right") - 1, 0, dense.K - 1)
            return dense.std[k]
        return GroundTruth(effect, sigma, "dense_oracle", (float(z[0]), float(z[-1])))
    raise CapabilityError(f"no ground truth for feature {s} of the {spec.label} example")


# ---- dense oracle -------------------------------------------------------

def dense_oracle(spec: GeneratorSpec, n_dense: int, k_dense: int, s: int,
                 support: Optional[tuple[float, float]] = None) -> BinStats:
    """Fixed-size bin statistics from a large fresh sample.

    Bins span ``support``, defaulting to the feature's bounded support or,
    for unbounded features, the central 99.9% of the dense sample. Points
    outside the support are ignored.
    """
    sample = generate(replace(spec, n=int(n_dense)))
    xs = sample.data.column(s)
    if support is None:
        support = feature_support(spec, s)
    if support is None:
        support = tuple(float(q) for q in np.quantile(xs, [0.0005, 0.9995]))
    lo, hi = support
    grads = gradient_matrix(sample.model, sample.data)[:, s]
    keep = (xs >= lo) & (xs <= hi)
    effects = LocalEffects(s, xs[keep], grads[keep], source="analytic")
    partition = fixed_partition(lo, hi, int(k_dense))
    stats = compute_bin_stats(effects, partition, histograms=False, warn=False)
    if (stats.counts < 2).any():
        k = int(np.argmin(stats.counts))
        raise InfeasibleError(
            f"dense bin {k + 1} holds {stats.counts[k]} points; raise n_dense or lower k_dense")
    return stats


def _overlaps(dense: Partition, coarse: Partition) -> np.ndarray:
    zd, zc = dense.limits, coarse.limits
    left = np.maximum(zc[:-1, None], zd[None, :-1])
    right = np.minimum(zc[1:, None], zd[None, 1:])
    return np.clip(right - left, 0.0, None)


def aggregate_dense(dense: BinStats, partition: Partition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average dense statistics onto the bins of ``partition``.

    Returns per-bin mean effect, mean variance and mean squared residual of
    the dense effects around the bin's mean, all weighted by overlap width.
    """
    w = _overlaps(dense.partition, partition)
    total = w.sum(axis=1)
    if not (total > 0).all():
        k = int(np.argmin(total))
        raise InputError(f"bin {k + 1} of the partition lies outside the dense reference range")
    mu = w @ dense.mean / total
    var = w @ dense.std_filled ** 2 / total
    resid = np.sum(w * (dense.mean[None, :] - mu[:, None]) ** 2, axis=1) / total
    return mu, var, resid
