import warnings

import numpy as np
import pytest

from rhale.baselines import GridCurve, ale_classic, default_grid, ice, pdp
from rhale.effects import FeatureMatrix, ModelHandle
from rhale.errors import InputError
from rhale.estimator import rhale
from rhale.synthetic import GeneratorSpec, generate, ground_truth


def additive_model():
    return ModelHandle(lambda x: x[:, 0] + np.sin(x[:, 1]) * x[:, 2],
                       lambda x: np.column_stack([np.ones(len(x)), np.cos(x[:, 1]) * x[:, 2], np.sin(x[:, 1])]))


@pytest.fixture
def data():
    return FeatureMatrix(np.random.default_rng(3).normal(size=(60, 3)))


def test_pdp_additive(data):
    grid = np.linspace(-1, 1, 11)
    curve = pdp(additive_model(), data, 0, grid)
    g = np.sin(data.values[:, 1]) * data.values[:, 2]
    assert np.allclose(curve.values, grid + g.mean(), atol=1e-12)


def test_pdp_constant_model(data):
    curve = pdp(ModelHandle(lambda x: np.full(len(x), 2.0)), data, 1)
    assert np.all(curve.values == 2.0)
    assert curve.grid.size == 101


def test_ice_mean_equals_pdp(data):
    model = ModelHandle(lambda x: x[:, 0] * x[:, 1] + x[:, 2] ** 2)
    bundle = ice(model, data, 0)
    curve = pdp(model, data, 0)
    assert bundle.n_curves == data.n_rows
    assert np.max(np.abs(bundle.curves.mean(axis=0) - curve.values)) <= 1e-12


def test_centered_ice_additive_rows_coincide(data):
    bundle = ice(additive_model(), data, 0, center=True)
    assert np.all(bundle.curves[:, 0] == 0)
    assert np.max(np.ptp(bundle.curves, axis=0)) <= 1e-9


def test_grid_outside_range(data):
    with pytest.raises(InputError):
        pdp(additive_model(), data, 0, [-100.0, 0.0])


def test_grid_curve_validation():
    with pytest.raises(InputError):
        GridCurve([0.0, 0.0], [1.0, 2.0])
    assert GridCurve([0.0, 1.0], [0.0, 2.0])(0.25) == 0.5


def test_ale_classic_linear():
    data = FeatureMatrix(np.random.default_rng(0).uniform(size=(200, 2)))
    model = ModelHandle(lambda x: 3.0 * x[:, 0] + x[:, 1])
    for K in (1, 5, 17):
        curve = ale_classic(model, data, 0, K)
        assert np.allclose(curve.bin_effects, 3.0)
        assert np.allclose(curve.values, 3.0 * (curve.grid - curve.grid[0]))


def test_ale_classic_quadratic_bin_effect():
    data = FeatureMatrix(np.random.default_rng(1).uniform(size=(300, 1)))
    curve = ale_classic(ModelHandle(lambda x: x[:, 0] ** 2), data, 0, 6)
    z = curve.grid
    assert np.allclose(curve.bin_effects, z[1:] + z[:-1])


def test_ale_classic_empty_bin_flagged():
    data = FeatureMatrix(np.array([[0.0], [0.1], [0.9], [1.0]]))
    with pytest.warns(UserWarning):
        curve = ale_classic(ModelHandle(lambda x: x[:, 0]), data, 0, 4)
    assert curve.bin_effects[1] == 0.0 and curve.bin_effects[2] == 0.0
    assert curve.flags == ("bin 2: empty", "bin 3: empty")


def test_ale_classic_agrees_with_derivative_route():
    sample = generate(GeneratorSpec("running", 4000, 9))
    gaps = []
    for K in (10, 50, 100):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            classic = ale_classic(sample.model, sample.data, 0, K)
            res = rhale(sample.data, sample.model, 0, binning=K)
        gaps.append(np.max(np.abs(classic.values - res.effect(classic.grid))))
    # the two estimators differ by terms that shrink with the bin width
    assert gaps[2] < gaps[0]
    assert gaps[2] < 0.15


def test_pdp_running_closed_form():
    sample = generate(GeneratorSpec("running", 5000, 4))
    curve = pdp(sample.model, sample.data, 0)
    x = curve.grid
    closed = np.sin(2 * np.pi * x) * ((x < 0) - 5 / 3)
    resid = (curve.values - curve.values.mean()) - (closed - closed.mean())
    assert np.mean(np.abs(resid)) < 0.1


def test_pdp_running_is_misleading():
    sample = generate(GeneratorSpec("running", 2000, 4))
    curve = pdp(sample.model, sample.data, 0)
    truth = ground_truth(GeneratorSpec("running"), 0).effect(curve.grid)
    gap = (curve.values - curve.values.mean()) - (truth - truth.mean())
    assert np.mean(np.abs(gap)) > 0.3


def test_running_ice_two_groups():
    sample = generate(GeneratorSpec("running", 3000, 6))
    bundle = ice(sample.model, sample.data, 0, grid=np.array([-0.25, 0.0]))
    x2 = sample.data.values[:, 1]
    # at x1 = -0.25 the sine is -1: rows with x3 < 0 give 1 + 0.75 x2, the rest -1 + 0.75 x2
    shifted = bundle.curves[:, 0] - 0.75 * x2
    frac = np.mean(np.isclose(shifted, 1.0))
    assert abs(frac - 5 / 6) < 0.03
    assert default_grid(sample.data, 0).size == 101
