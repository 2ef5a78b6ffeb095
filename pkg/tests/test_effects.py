import numpy as np
import pytest

from rhale.effects import (
    FeatureMatrix,
    LocalEffects,
    ModelHandle,
    evaluate_model,
    gradient_matrix,
    local_effects,
    local_effects_analytic,
    local_effects_finite_diff,
    read_csv_matrix,
    write_csv_matrix,
)
from rhale.errors import CapabilityError, InputError, ModelError
from rhale.synthetic import GeneratorSpec, make_model


def test_feature_matrix_validation():
    with pytest.raises(InputError):
        FeatureMatrix(np.ones((1, 3)))
    with pytest.raises(InputError, match="row 1, column 0"):
        FeatureMatrix(np.array([[0.0, 1.0], [np.nan, 2.0]]))
    with pytest.raises(InputError):
        FeatureMatrix(np.zeros((2, 2)), ("a",))
    fm = FeatureMatrix(np.array([1.0, 2.0, 3.0]))
    assert fm.values.shape == (3, 1)
    assert fm.names == ("x1",)
    assert not fm.values.flags.writeable


def test_constant_feature_rejected():
    fm = FeatureMatrix(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(InputError, match="constant"):
        fm.check_feature(0)
    fm.check_feature(1)
    with pytest.raises(InputError):
        fm.check_feature(2)


def test_concept_model_value():
    model = make_model(GeneratorSpec("concept"))
    out = evaluate_model(model, np.array([[0.0, 1.0, 0.5]]))
    assert out[0] == 5.0


def test_running_model_value():
    model = make_model(GeneratorSpec("running"))
    out = evaluate_model(model, np.array([[0.25, 1.0, 0.25]]))
    assert out[0] == pytest.approx(1.25, abs=1e-15)


def test_zero_model():
    model = ModelHandle(lambda x: np.zeros(len(x)))
    assert np.all(evaluate_model(model, np.random.default_rng(0).normal(size=(5, 2))) == 0)


def test_arity_and_nonfinite_errors():
    model = ModelHandle(lambda x: x[:, 0], n_features=3)
    with pytest.raises(InputError):
        evaluate_model(model, np.zeros((4, 2)))
    bad = ModelHandle(lambda x: np.where(x[:, 0] > 0, np.inf, 0.0))
    with pytest.raises(ModelError, match="row 2"):
        evaluate_model(bad, np.array([[0.0], [-1.0], [1.0]]))


def test_per_row_model():
    model = ModelHandle(lambda row: row[0] * row[1], lambda row: np.array([row[1], row[0]]),
                        vectorized=False)
    data = FeatureMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert list(evaluate_model(model, data)) == [2.0, 12.0]
    assert local_effects_analytic(model, data, 0).effects.tolist() == [2.0, 4.0]


def test_running_analytic_x2_effect(rng):
    spec = GeneratorSpec("running", 50, 3)
    from rhale.synthetic import generate
    sample = generate(spec)
    eff = local_effects_analytic(sample.model, sample.data, 1)
    assert np.allclose(eff.effects, sample.data.column(0) + 1)
    assert eff.source == "analytic"


def test_concept_x2_effect_at_positive_x3():
    model = make_model(GeneratorSpec("concept"))
    data = FeatureMatrix(np.array([[0.1, -0.3, 0.5], [0.2, 0.7, 0.5]]))
    assert np.all(local_effects_analytic(model, data, 1).effects == 5.0)


def test_constant_model_effects():
    model = ModelHandle(lambda x: np.full(len(x), 3.0), lambda x: np.zeros_like(x))
    data = FeatureMatrix(np.arange(6.0).reshape(3, 2))
    assert np.all(local_effects(model, data, 0).effects == 0)
    assert np.all(local_effects(model, data, 0, "finite_difference").effects == 0)


def test_missing_gradient():
    model = ModelHandle(lambda x: x[:, 0])
    data = FeatureMatrix(np.arange(4.0).reshape(2, 2))
    with pytest.raises(CapabilityError):
        local_effects_analytic(model, data, 0)
    assert local_effects(model, data, 0).source == "finite_difference"


def test_finite_difference_quadratic():
    model = ModelHandle(lambda x: x[:, 0] ** 2)
    data = FeatureMatrix(np.array([[1.0], [2.0]]))
    eff = local_effects_finite_diff(model, data, 0, h=1e-4)
    assert eff.effects[0] == pytest.approx(2.0, abs=1e-6)
    assert eff.step == 1e-4
    with pytest.raises(InputError):
        local_effects_finite_diff(model, data, 0, h=0.0)


def test_finite_difference_matches_analytic():
    from rhale.synthetic import generate
    sample = generate(GeneratorSpec("nonlinear", 200, 1))
    a = local_effects_analytic(sample.model, sample.data, 0).effects
    f = local_effects_finite_diff(sample.model, sample.data, 0).effects
    assert np.max(np.abs(a - f)) < 1e-6


def test_gradient_cache_reused():
    calls = []

    def grad(x):
        calls.append(1)
        return np.ones_like(x)

    model = ModelHandle(lambda x: x.sum(axis=1), grad)
    data = FeatureMatrix(np.arange(6.0).reshape(3, 2))
    g1 = gradient_matrix(model, data)
    g2 = gradient_matrix(model, data)
    assert g1 is g2 and len(calls) == 1


def test_local_effects_validation():
    with pytest.raises(InputError):
        LocalEffects(0, [1.0, 2.0], [1.0])
    with pytest.raises(InputError):
        LocalEffects(0, [1.0], [np.inf])


def test_csv_roundtrip(tmp_path):
    values = np.array([[0.1, -2.5e-17], [1 / 3, 1e300]])
    write_csv_matrix(tmp_path / "m.csv", values, ["a", "b"])
    names, back = read_csv_matrix(tmp_path / "m.csv")
    assert names == ["a", "b"]
    assert np.array_equal(back, values)
    assert b"\r" not in (tmp_path / "m.csv").read_bytes()


def test_csv_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,x\n")
    with pytest.raises(InputError):
        read_csv_matrix(tmp_path / "bad.csv")
    with pytest.raises(InputError):
        read_csv_matrix(tmp_path / "missing.csv")
