import json
import warnings
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_effects
from rhale.binning import BinningConfig, Partition, fixed_partition
from rhale.errors import DegenerateBinError, EmptyBinError, InputError
from rhale.estimator import (
    HeterogeneityWarning,
    accumulate_effect,
    accumulate_std,
    bin_effect,
    bin_std,
    compute_bin_stats,
    decompose_heterogeneity,
    rhale,
    rhale_from_effects,
)
from rhale.synthetic import GeneratorSpec, generate

SCHEMA = json.loads((Path(__file__).parents[1] / "src/rhale/schemas/effect.schema.json").read_text())


def stats_for(limits, means, stds):
    """BinStats with chosen means/stds, built from two points per bin."""
    xs, fx = [], []
    for k, (m, s) in enumerate(zip(means, stds)):
        lo, hi = limits[k], limits[k + 1]
        # two points with sample std s: m +- s / sqrt(2)
        xs += [lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)]
        fx += [m - s / np.sqrt(2), m + s / np.sqrt(2)]
    xs[0], xs[-1] = limits[0], limits[-1]
    return compute_bin_stats(make_effects(xs, fx), Partition(limits))


def test_bin_effect_and_std():
    assert bin_effect([1, 2, 3]) == 2.0
    assert bin_effect([0, 0]) == 0.0
    assert bin_std([1, 2, 3]) == 1.0
    assert bin_std([4, 4, 4]) == 0.0
    with pytest.raises(EmptyBinError):
        bin_effect([])
    with pytest.raises(DegenerateBinError):
        bin_std([1.0])


def test_accumulate_single_bin():
    bins = stats_for([0.0, 1.0], [3.0], [5.0])
    assert accumulate_effect(bins, 0.7) == pytest.approx(0.7 * 3.0)
    assert accumulate_effect(bins, 0.0) == 0.0
    assert accumulate_std(bins, 1.0) == pytest.approx(5.0)
    with pytest.raises(InputError):
        accumulate_effect(bins, 1.5)


def test_accumulate_two_bins():
    bins = stats_for([0.0, 0.5, 1.0], [1.0, -1.0], [0.0, 0.0])
    assert accumulate_effect(bins, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert accumulate_std(bins, np.linspace(0, 1, 7)) == pytest.approx(np.zeros(7), abs=1e-15)
    bins = stats_for([0.0, 1.0, 2.0], [0.0, 0.0], [3.0, 4.0])
    assert accumulate_std(bins, 2.0) == pytest.approx(5.0)


def test_literal_mode_is_step():
    bins = stats_for([0.0, 1.0, 2.0], [2.0, 1.0], [1.0, 1.0])
    assert accumulate_effect(bins, 0.5, "literal") == pytest.approx(2.0)
    assert accumulate_effect(bins, 0.5) == pytest.approx(1.0)
    assert accumulate_std(bins, 1.5, "literal") == pytest.approx(np.sqrt(2.0))
    with pytest.raises(InputError):
        accumulate_effect(bins, 0.5, "bogus")


def test_sparse_bins_flagged():
    eff = make_effects([0.0, 0.1, 0.2, 1.0], [1.0, 2.0, 3.0, 4.0])
    with pytest.warns(HeterogeneityWarning):
        bins = compute_bin_stats(eff, Partition([0.0, 0.5, 0.6, 1.0]))
    assert bins.counts.tolist() == [3, 0, 1]
    assert bins.mean[1] == 0.0 and np.isnan(bins.std[1]) and np.isnan(bins.std[2])
    assert bins.flags == ("bin 2: empty", "bin 3: single")
    assert np.isfinite(accumulate_std(bins, 1.0))


def test_histograms():
    r = np.random.default_rng(1)
    eff = make_effects(r.uniform(size=200), r.normal(size=200))
    bins = compute_bin_stats(eff, fixed_partition(eff.x_min, eff.x_max, 3))
    for k, h in enumerate(bins.histograms):
        assert len(h.counts) == 32 and sum(h.counts) == bins.counts[k]
        assert h.minimum <= h.q1 <= h.median <= h.q3 <= h.maximum
    assert bins.counts.sum() == 200


def test_decomposition_examples():
    eff = make_effects([0.1, 0.2, 0.6, 0.7], [0.0, 0.0, 2.0, 2.0])
    rep = decompose_heterogeneity(eff, Partition([0.0, 1.0]), Partition([0.0, 0.5, 1.0]))
    assert rep.total[0] == pytest.approx(1.0)
    assert rep.within[0] == 0.0
    assert rep.bin_error[0] == pytest.approx(1.0)
    eff = make_effects([0.1, 0.2, 0.6, 0.7], [-1.0, 1.0, 1.0, -1.0])
    rep = decompose_heterogeneity(eff, Partition([0.0, 1.0]), Partition([0.0, 0.5, 1.0]))
    assert rep.bin_error[0] == 0.0 and rep.within[0] == pytest.approx(rep.total[0])


def test_decomposition_errors():
    eff = make_effects([0.1, 0.2, 0.6, 0.7], [0.0, 0.0, 2.0, 2.0])
    with pytest.raises(InputError):
        decompose_heterogeneity(eff, Partition([0.0, 0.5, 1.0]), Partition([0.0, 0.4, 1.0]))
    with pytest.raises(DegenerateBinError):
        decompose_heterogeneity(eff, Partition([0.0, 1.0]), Partition([0.0, 0.3, 0.5, 1.0]))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(20, 300), coarse_k=st.integers(1, 4),
       split=st.integers(1, 5))
def test_decomposition_identity_property(seed, n, coarse_k, split):
    r = np.random.default_rng(seed)
    xs = np.concatenate(([0.0, 1.0], r.uniform(size=n)))
    fx = r.normal(size=xs.size) * r.uniform(0.1, 10) + r.uniform(-5, 5) * xs
    coarse = fixed_partition(0.0, 1.0, coarse_k)
    fine = fixed_partition(0.0, 1.0, coarse_k * split)
    try:
        rep = decompose_heterogeneity(make_effects(xs, fx), coarse, fine)
    except DegenerateBinError:
        return
    assert np.allclose(rep.within + rep.bin_error, rep.total, rtol=1e-10, atol=0)


def dale_direct(xs, fx, limits, x):
    """Independent DALE: full bins to the left of x, then the partial bin."""
    total = 0.0
    for k in range(len(limits) - 1):
        lo, hi = limits[k], limits[k + 1]
        last = k == len(limits) - 2
        sel = [f for xi, f in zip(xs, fx) if lo <= xi < hi or (last and xi == hi)]
        mu = sum(sel) / len(sel)
        if x < hi or last:
            return total + mu * (x - lo)
        total += mu * (hi - lo)
    return total


def test_fixed_size_matches_direct_dale():
    sample = generate(GeneratorSpec("running", 800, 5))
    res = rhale(sample.data, sample.model, 0, binning=20)
    xs = list(sample.data.column(0))
    from rhale.effects import local_effects_analytic
    fx = list(local_effects_analytic(sample.model, sample.data, 0).effects)
    limits = list(res.partition.limits)
    for x in np.linspace(limits[0], limits[-1], 37):
        assert res.effect(x) == pytest.approx(dale_direct(xs, fx, limits, x), abs=1e-9)


def test_curve_continuity_and_envelope_monotone():
    sample = generate(GeneratorSpec("running", 1000, 2))
    res = rhale(sample.data, sample.model, 0)
    z = res.partition.limits
    eps = 1e-9 * (z[-1] - z[0])
    inner = z[1:-1]
    assert np.allclose(res.effect(inner - eps), res.effect(inner + eps), atol=1e-6)
    x = np.linspace(z[0], z[-1], 1001)
    assert np.all(np.diff(res.std(x)) >= -1e-12)
    assert res.effect(z[0]) == 0.0


def test_centering():
    sample = generate(GeneratorSpec("running", 500, 2))
    res = rhale(sample.data, sample.model, 0, center=True)
    assert res.centered
    assert np.mean(res.effect(sample.data.column(0))) == pytest.approx(0.0, abs=1e-12)


def test_concept_x3_zero():
    sample = generate(GeneratorSpec("concept", 100, 0))
    res = rhale(sample.data, sample.model, 2)
    x = np.linspace(res.partition.x_min, res.partition.x_max, 50)
    assert np.all(res.effect(x) == 0) and np.all(res.std(x) == 0)


def test_running_first_bin_effect():
    sample = generate(GeneratorSpec("running", 20_000, 0))
    res = rhale(sample.data, sample.model, 0, binning=Partition([-0.5, -0.4, 0.5]))
    # x1 and x3 both negative here, so the effect is -2pi cos(2pi x1) + x2
    expected = -(np.sin(2 * np.pi * -0.4) - np.sin(2 * np.pi * -0.5)) / 0.1
    assert res.bins.mean[0] == pytest.approx(expected, abs=0.1)
    assert 5.5 < res.bins.mean[0] < 6.5


def test_running_wide_bin_std():
    sample = generate(GeneratorSpec("running", 20_000, 0))
    res = rhale(sample.data, sample.model, 0, binning=Partition([-0.5, 0.05, 0.5]))
    assert res.bins.std[1] == pytest.approx(2.0, abs=0.1)


def test_binning_modes():
    sample = generate(GeneratorSpec("nonlinear", 300, 0))
    assert rhale(sample.data, sample.model, 0, binning="fixed:7").bins.K == 7
    assert rhale(sample.data, sample.model, 0, binning=4).binning == "fixed:4"
    with pytest.raises(InputError):
        rhale(sample.data, sample.model, 0, binning="nope")
    with pytest.raises(InputError):
        rhale(sample.data, sample.model, 0, binning="fixed:x")


def test_to_dict_schema():
    sample = generate(GeneratorSpec("concept", 100, 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = rhale(sample.data, sample.model, 1, binning=60)
    payload = json.loads(json.dumps(res.to_dict()))
    jsonschema.validate(payload, SCHEMA)
    assert len(payload["bins"]) == 60


def test_rhale_from_effects_constant_feature():
    with pytest.raises(InputError):
        rhale_from_effects(make_effects([1.0, 1.0], [0.0, 1.0]))
