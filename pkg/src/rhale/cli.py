"""Command-line interface: ``rhale synth | explain | bench``.

Exit codes: 0 success, 2 usage or input error, 3 infeasible configuration,
4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import svg
from .baselines import ale_classic, ice
from .binning import BinningConfig, Partition
from .effects import (
    FeatureMatrix,
    LocalEffects,
    gradient_matrix,
    local_effects,
    read_csv_matrix,
    write_csv_matrix,
)
from .errors import CapabilityError, InfeasibleError, InputError, RhaleError
from .estimator import rhale_from_effects
from .evaluation import DEFAULT_K_LIST, run_benchmark
from .synthetic import ALIASES, EXAMPLES, GeneratorSpec, generate, ground_truth

DEFAULT_SEED = 0
EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4
EXAMPLE_NAMES = tuple(EXAMPLES) + tuple(ALIASES)
FORMATS = ("json", "csv", "svg")


def _dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _formats(value: Optional[list[str]]) -> set[str]:
    if not value:
        return set(FORMATS)
    out = set()
    for item in value:
        for f in item.split(","):
            if f not in FORMATS:
                raise InputError(f"unknown format {f!r}; choose from {', '.join(FORMATS)}")
            out.add(f)
    return out


def _config(args) -> BinningConfig:
    return BinningConfig(k_max=args.k_max, alpha=args.alpha, n_ppb=args.n_ppb)


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _spec(args, n: Optional[int] = None) -> GeneratorSpec:
    return GeneratorSpec.named(args.example, args.n if n is None else n, args.seed)


def cmd_synth(args) -> int:
    spec = _spec(args)
    out = _out_dir(args.out)
    sample = generate(spec)
    grads = gradient_matrix(sample.model, sample.data)
    names = sample.data.names
    write_csv_matrix(out / "data.csv", sample.data.values, names)
    write_csv_matrix(out / "gradients.csv", grads, [f"d_{n}" for n in names])
    features = {}
    for s, name in enumerate(names):
        try:
            features[name] = ground_truth(spec, s).to_dict()
        except CapabilityError:
            features[name] = None
    _dump_json(out / "ground_truth.json", {"spec": spec.to_dict(), "features": features})
    print(f"wrote {sample.data.n_rows} rows to {out}")
    return EXIT_OK


def _feature_index(value: str, data: FeatureMatrix) -> int:
    if value in data.names:
        return data.names.index(value)
    try:
        s = int(value)
    except ValueError:
        raise InputError(f"unknown feature {value!r}; columns are {', '.join(data.names)}") from None
    data.check_feature(s, require_range=False)
    return s


def _binning(value: str):
    if value.startswith("file:"):
        path = Path(value[5:])
        try:
            return Partition.from_json(path.read_text())
        except OSError as exc:
            raise InputError(f"cannot read partition file {path}: {exc}") from exc
    return value


def _load_explain_source(args):
    """Dataset, optional model and the local effects of the chosen feature."""
    model = None
    if args.data:
        names, values = read_csv_matrix(args.data)
        data = FeatureMatrix(values, tuple(names))
    elif args.example:
        sample = generate(_spec(args))
        data, model = sample.data, sample.model
    else:
        raise InputError("give --data CSV or --example NAME")
    if args.data and args.example:
        model = generate(_spec(args, n=2)).model
    s = _feature_index(args.feature, data)
    data.check_feature(s)
    if args.gradients:
        _, grads = read_csv_matrix(args.gradients)
        if grads.shape != data.values.shape:
            raise InputError(f"gradients shape {grads.shape} does not match data {data.values.shape}")
        effects = LocalEffects(s, data.column(s), grads[:, s], source="supplied")
    elif model is not None:
        effects = local_effects(model, data, s)
    else:
        raise InputError("no gradients: pass --gradients CSV or a built-in --example model")
    return data, model, s, effects


def _write_bins_csv(path: Path, result) -> None:
    bins = result.bins
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin", "left", "right", "count", "effect", "std"])
        for k in range(bins.K):
            writer.writerow([k + 1, repr(float(bins.limits[k])), repr(float(bins.limits[k + 1])),
                             int(bins.counts[k]), repr(float(bins.mean[k])),
                             "" if np.isnan(bins.std[k]) else repr(float(bins.std[k]))])


def cmd_explain(args) -> int:
    formats = _formats(args.format)
    data, model, s, effects = _load_explain_source(args)
    if args.baseline != "none" and model is None:
        raise InputError(f"--baseline {args.baseline} needs a model; use --example")
    out = _out_dir(args.out)
    result = rhale_from_effects(effects, _config(args), _binning(args.binning), center=args.center,
                                n_total=data.n_rows, feature_name=data.names[s])
    if "json" in formats:
        _dump_json(out / "effect.json", result.to_dict())
    if "csv" in formats:
        _write_bins_csv(out / "effect_bins.csv", result)
    if "svg" in formats:
        (out / "effect.svg").write_text(svg.effect_svg(result, f"RHALE: {data.names[s]}"))
    if args.baseline == "pdp-ice":
        bundle = ice(model, data, s)
        curve = bundle.mean()
        if "json" in formats:
            _dump_json(out / "pdp_ice.json", {"pdp": curve.to_dict(), "ice": bundle.to_dict()})
        if "svg" in formats:
            (out / "pdp_ice.svg").write_text(svg.pdp_ice_svg(curve, bundle, f"PDP/ICE: {data.names[s]}"))
    elif args.baseline == "ale":
        K = result.bins.K if args.ale_bins is None else args.ale_bins
        curve = ale_classic(model, data, s, K)
        if "json" in formats:
            _dump_json(out / "ale.json", curve.to_dict())
    print(f"{data.names[s]}: {result.bins.K} bins, written to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.example:
        raise InputError("bench needs a generator: --example NAME")
    formats = _formats(args.format)
    k_list = DEFAULT_K_LIST
    if args.k_list is not None:
        try:
            k_list = tuple(int(k) for k in args.k_list.split(","))
        except ValueError:
            raise InputError(f"--k-list must be comma-separated integers, got {args.k_list!r}") from None
    spec = _spec(args)
    report = run_benchmark(spec, int(args.feature), k_list, _config(args), args.trials, args.n,
                           args.seed, args.n_dense, args.k_dense, args.workers)
    out = _out_dir(args.out)
    if "csv" in formats:
        (out / "bench.csv").write_text(report.to_csv())
    if "json" in formats:
        (out / "bench.json").write_text(report.to_json())
    if "svg" in formats:
        for m in ("l_mu", "l_sigma", "l_rho"):
            (out / f"bench_{m}.svg").write_text(svg.metric_svg(report, m))
    print(f"{len(report.records)} records written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhale", description="Heterogeneity-aware accumulated local effects.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_default):
        p.add_argument("--example", choices=EXAMPLE_NAMES)
        p.add_argument("--n", type=int, default=n_default, help="rows to generate")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", default=".")

    def binning_opts(p):
        p.add_argument("--alpha", type=float, default=0.2)
        p.add_argument("--n-ppb", type=int, default=None, help="minimum points per bin")
        p.add_argument("--k-max", type=int, default=50)
        p.add_argument("--format", action="append", help="json, csv, svg (repeatable or comma list)")

    p = sub.add_parser("synth", help="write a synthetic dataset, its gradients and ground truth")
    common(p, 1000)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("explain", help="explain one feature")
    common(p, 1000)
    binning_opts(p)
    p.add_argument("--data", help="CSV with a header row")
    p.add_argument("--gradients", help="CSV of partial derivatives, same shape as --data")
    p.add_argument("--feature", default="0", help="column index or name")
    p.add_argument("--binning", default="auto", help="auto | fixed:K | file:PATH")
    p.add_argument("--center", action="store_true", help="shift the curve to zero data mean")
    p.add_argument("--baseline", choices=("none", "pdp-ice", "ale"), default="none")
    p.add_argument("--ale-bins", type=int, default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("bench", help="automatic vs fixed-size binning over repeated trials")
    common(p, 500)
    binning_opts(p)
    p.add_argument("--feature", default=0, type=int)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--k-list", default=None, help="comma-separated fixed bin counts")
    p.add_argument("--n-dense", type=int, default=100_000)
    p.add_argument("--k-dense", type=int, default=200)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (RhaleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
