"""Benchmark of automatic against fixed-size binning on synthetic examples."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .binning import BinningConfig, Partition
from .effects import local_effects
from .errors import InputError
from .estimator import BinStats, rhale_from_effects
from .synthetic import GeneratorSpec, aggregate_dense, dense_oracle, generate

__all__ = [
    "DEFAULT_K_LIST",
    "TrialRecord",
    "BenchmarkReport",
    "l_mu",
    "l_sigma",
    "l_rho",
    "metrics",
    "clip_k_list",
    "trial_seeds",
    "run_benchmark",
]

DEFAULT_K_LIST = tuple(range(1, 31)) + (40, 50, 75, 100)
METRICS = ("l_mu", "l_sigma", "l_rho")


def _check(dense: BinStats, partition: Partition) -> None:
    if partition.K > dense.K:
        raise InputError(f"reference has {dense.K} bins, coarser than the {partition.K} evaluated")


def l_mu(dense: BinStats, est: BinStats) -> float:
    """Mean absolute error between reference and estimated bin effects."""
    _check(dense, est.partition)
    mu, _, _ = aggregate_dense(dense, est.partition)
    return float(np.sum(np.abs(mu - est.mean)) / est.K)


def l_sigma(dense: BinStats, est: BinStats) -> float:
    """Mean absolute error between reference and estimated bin std."""
    _check(dense, est.partition)
    _, var, _ = aggregate_dense(dense, est.partition)
    return float(np.sum(np.abs(np.sqrt(var) - est.std_filled)) / est.K)


def l_rho(dense: BinStats, partition: Partition) -> float:
    """Mean root residual of the reference effect around each bin's mean.

    Normalised by the number of limits (one more than the bin count).
    """
    _check(dense, partition)
    _, _, resid = aggregate_dense(dense, partition)
    return float(np.sum(np.sqrt(resid)) / (partition.K + 1))


def metrics(dense: BinStats, est: BinStats) -> dict[str, float]:
    return {"l_mu": l_mu(dense, est), "l_sigma": l_sigma(dense, est),
            "l_rho": l_rho(dense, est.partition)}


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    method: str
    K: int
    limits: tuple[float, ...]
    l_mu: float
    l_sigma: float
    l_rho: float


@dataclass
class BenchmarkReport:
    """All trial records plus per-(method, K) means and stds of the metrics."""

    spec: GeneratorSpec
    feature: int
    config: BinningConfig
    trials: int
    n: int
    k_list: tuple[int, ...]
    records: list[TrialRecord] = field(default_factory=list)

    def summary(self) -> list[dict]:
        groups: dict[tuple[str, int], list[TrialRecord]] = {}
        for r in self.records:
            key = ("auto", 0) if r.method == "auto" else ("fixed", r.K)
            groups.setdefault(key, []).append(r)
        rows = []
        for (method, K), recs in sorted(groups.items()):
            recs = sorted(recs, key=lambda r: r.trial)
            row = {"method": method, "K": K if method == "fixed" else None, "trials": len(recs)}
            if method == "auto":
                row["mean_bins"] = float(np.mean([r.K for r in recs]))
            for m in METRICS:
                vals = np.array([getattr(r, m) for r in recs])
                row[f"{m}_mean"] = float(vals.mean())
                row[f"{m}_std"] = float(vals.std())
            rows.append(row)
        return rows

    def mean(self, metric: str, method: str = "auto", K: Optional[int] = None) -> float:
        vals = [getattr(r, metric) for r in self.records
                if r.method == method and (K is None or r.K == K)]
        if not vals:
            raise InputError(f"no records for {method} K={K}")
        return float(np.mean(sorted(vals)))

    def best_fixed(self, metric: str) -> tuple[int, float]:
        """(K, mean metric) of the fixed-size binning with the lowest mean."""
        scores = {K: self.mean(metric, "fixed", K) for K in self.k_list}
        K = min(scores, key=lambda k: (scores[k], k))
        return K, scores[K]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "feature": self.feature,
            "config": {"k_max": self.config.k_max, "alpha": self.config.alpha,
                       "n_ppb": self.config.n_ppb},
            "trials": self.trials,
            "n": self.n,
            "k_list": list(self.k_list),
            "summary": self.summary(),
            "records": [
                {"trial": r.trial, "seed": str(r.seed), "method": r.method, "K": r.K,
                 "limits": list(r.limits), "l_mu": r.l_mu, "l_sigma": r.l_sigma, "l_rho": r.l_rho}
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "K", "trial", "seed", "l_mu", "l_sigma", "l_rho"])
        for r in self.records:
            writer.writerow([r.method, r.K, r.trial, r.seed,
                             repr(r.l_mu), repr(r.l_sigma), repr(r.l_rho)])
        return buf.getvalue()


def clip_k_list(k_list: Sequence[int], n: int) -> tuple[int, ...]:
    """Drop bin counts that would leave fewer than two points per bin on average."""
    return tuple(sorted({int(k) for k in k_list if 1 <= int(k) <= n // 2}))


def trial_seeds(master: int, trials: int) -> tuple[int, list[int]]:
    """Seed of the dense reference and one seed per trial, from ``master``."""
    children = np.random.SeedSequence(int(master)).spawn(trials + 1)
    seeds = [int(c.generate_state(1, np.uint64)[0]) for c in children]
    return seeds[0], seeds[1:]


def _run_trial(spec: GeneratorSpec, feature: int, config: BinningConfig, k_list, dense: BinStats,
               trial: int, seed: int) -> list[TrialRecord]:
    sample = generate(replace(spec, seed=seed))
    effects = local_effects(sample.model, sample.data, feature)
    records = []
    for K in (None, *k_list):
        result = rhale_from_effects(effects, config, "auto" if K is None else K,
                                    n_total=spec.n, histograms=False, warn=False)
        m = metrics(dense, result.bins)
        records.append(TrialRecord(
            trial, seed, "auto" if K is None else "fixed", result.bins.K,
            tuple(float(z) for z in result.partition.limits), **m))
    return records


def run_benchmark(spec: GeneratorSpec, feature: int = 0, k_list: Sequence[int] = DEFAULT_K_LIST,
                  config: BinningConfig = BinningConfig(), trials: int = 30, n: int = 500,
                  seed: int = 0, n_dense: int = 100_000, k_dense: int = 200,
                  workers: Optional[int] = None) -> BenchmarkReport:
    """Compare automatic binning with every fixed K over independent trials.

    The dense reference is drawn once per benchmark. Each trial draws a
    fresh ``n``-row dataset from a seed derived from ``seed``; results do not
    depend on ``workers``.
    """
    if trials < 1:
        raise InputError("need at least one trial")
    spec = replace(spec, n=int(n))
    k_list = clip_k_list(k_list, n)
    dense_seed, seeds = trial_seeds(seed, trials)
    dense = dense_oracle(replace(spec, seed=dense_seed), n_dense, k_dense, feature)
    report = BenchmarkReport(spec, feature, config, trials, n, k_list)

    def job(i):
        return _run_trial(spec, feature, config, k_list, dense, i, seeds[i])

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(job, range(trials)))
    else:
        chunks = [job(i) for i in range(trials)]
    for chunk in chunks:
        report.records.extend(chunk)
    return report
