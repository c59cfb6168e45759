import numpy as np
import pytest

from dmfpf.errors import ConfigError
from dmfpf.models import ModelSpec


def test_linear_catalog():
    m = ModelSpec(drift="linear", drift_params={"a": -2.0},
                  obs="linear", obs_params={"c": 3.0})
    X = np.array([[1.0], [-0.5]])
    np.testing.assert_allclose(m.drift_fn(X), -2.0 * X)
    np.testing.assert_allclose(m.h_fn(X), [3.0, -1.5])
    assert m.L_M == 2.0 and m.L_h == 3.0 and m.h_inf is None
    assert m.is_linear_gaussian


def test_double_well_catalog():
    m = ModelSpec(drift="double-well", drift_params={"a": 2.0},
                  obs="arctan", obs_params={"c": 1.0})
    X = np.array([[0.0], [1.0], [2.0]])
    np.testing.assert_allclose(m.drift_fn(X)[:, 0], [0.0, 0.0, -12.0])
    np.testing.assert_allclose(m.h_fn(X), np.arctan(X[:, 0]))
    assert m.h_inf == pytest.approx(np.pi / 2)
    assert m.L_h == 1.0
    assert m.L_M == 2.0 * 26.0  # sup |1 - 3x^2| on the default |x| <= 3 box
    assert not m.is_linear_gaussian


def test_sine_and_constant_catalog():
    m = ModelSpec(drift="sine", drift_params={"a": 0.5, "b": 2.0},
                  obs="constant", obs_params={"c0": -1.5})
    X = np.array([[np.pi / 4.0]])
    assert m.drift_fn(X)[0, 0] == pytest.approx(0.5 * np.sin(np.pi / 2.0))
    assert m.L_M == pytest.approx(1.0)
    np.testing.assert_allclose(m.h_fn(np.zeros((4, 1))), -1.5)
    assert m.L_h == 0.0 and m.h_inf == 1.5


def test_unknown_entries_rejected():
    with pytest.raises(ConfigError):
        ModelSpec(drift="cubic")
    with pytest.raises(ConfigError):
        ModelSpec(obs="quadratic")
    with pytest.raises(ConfigError):
        ModelSpec(dim=0)


def test_first_coordinate_observation_in_2d():
    m = ModelSpec(drift="linear", obs="linear", dim=2)
    X = np.array([[1.0, 9.0], [2.0, -9.0]])
    np.testing.assert_allclose(m.h_fn(X), [1.0, 2.0])
