import numpy as np
import pytest

from koopman.errors import ObservableDomainError, UsageError
from koopman.observables import Observable, ObservableDictionary, fourier_box


def test_constant_and_coordinate():
    states = np.array([[0.1, 0.2], [0.3, 0.4]])
    one = Observable("one", "constant")
    np.testing.assert_allclose(one(states), [1.0, 1.0])
    y = Observable("y", "coordinate", index=1)
    np.testing.assert_allclose(y(states), [0.2, 0.4])


def test_fourier_unit_box_convention():
    states = np.array([[0.25, 0.0], [0.5, 0.5]])
    z1 = Observable("z1", "fourier", k=(1, 0))
    np.testing.assert_allclose(z1(states), [np.exp(0.5j * np.pi), -1.0], atol=1e-15)
    assert np.allclose(np.abs(z1(states)), 1.0)


def test_phase_uses_radians():
    states = np.array([[np.pi]])
    z = Observable("z", "phase", k=(1,))
    np.testing.assert_allclose(z(states), [-1.0], atol=1e-15)


def test_sin_cos_match_fourier_parts():
    rng = np.random.default_rng(3)
    states = rng.random((20, 2))
    k = (2, -1)
    f = Observable("f", "fourier", k=k)(states)
    np.testing.assert_allclose(Observable("c", "cos", k=k)(states), f.real, atol=1e-14)
    np.testing.assert_allclose(Observable("s", "sin", k=k)(states), f.imag, atol=1e-14)


def test_monomial_values_and_negative_powers():
    states = np.array([[2.0, 3.0], [-1.0, 2.0]])
    m = Observable("m", "monomial", powers=(2, 1))
    np.testing.assert_allclose(m(states), [12.0, 2.0])
    inv = Observable("inv", "monomial", powers=(-2, 0))
    np.testing.assert_allclose(inv(states), [0.25, 1.0])


def test_monomial_domain_errors_name_observable_and_step():
    states = np.array([[1.0, 1.0], [0.0, 1.0], [2.0, 1.0]])
    inv = Observable("rinv", "monomial", powers=(-1, 0))
    with pytest.raises(ObservableDomainError) as err:
        inv(states)
    assert "rinv" in str(err.value)
    assert err.value.step == 1
    half = Observable("sq", "monomial", powers=(0.5, 0))
    with pytest.raises(ObservableDomainError):
        half(np.array([[-1.0, 0.0]]))


def test_dictionary_matrix_layout():
    states = np.array([[0.0, 0.0], [0.25, 0.5]])
    d = ObservableDictionary(
        (
            Observable("one", "constant"),
            Observable("z1", "fourier", k=(1, 0)),
        )
    )
    F = d.evaluate(states)
    assert F.shape == (2, 2)
    assert F.dtype == complex
    np.testing.assert_allclose(F[:, 0], [1.0, 1.0])
    np.testing.assert_allclose(F[1, 1], np.exp(0.5j * np.pi))


def test_dictionary_rejects_duplicate_names():
    with pytest.raises(UsageError):
        ObservableDictionary(
            (Observable("a", "constant"), Observable("a", "coordinate", index=0))
        )


def test_dictionary_json_roundtrip():
    d = ObservableDictionary(
        (
            Observable("z1", "fourier", k=(1, 0)),
            Observable("r2", "monomial", powers=(2, 0)),
            Observable("x", "coordinate", index=0),
        )
    )
    back = ObservableDictionary.from_json(d.to_json())
    assert back.names == d.names
    states = np.random.default_rng(0).random((5, 2)) + 0.5
    np.testing.assert_allclose(back.evaluate(states), d.evaluate(states), atol=1e-15)


def test_custom_observable_not_serializable():
    c = Observable("norm", "custom", fn=lambda s: np.linalg.norm(s, axis=1))
    states = np.array([[3.0, 4.0]])
    np.testing.assert_allclose(c(states), [5.0])
    with pytest.raises(UsageError):
        c.to_json()


def test_dimension_mismatch_is_usage_error():
    z = Observable("z", "fourier", k=(1, 0))
    with pytest.raises(UsageError):
        z(np.array([[1.0, 2.0, 3.0]]))
    x = Observable("x", "coordinate", index=5)
    with pytest.raises(UsageError):
        x(np.array([[1.0, 2.0]]))


def test_fourier_box_contents():
    d = fourier_box(2, 1)
    assert len(d) == 8  # 3x3 integer box minus origin
    assert all(e.kind == "fourier" for e in d)
    ks = {e.k for e in d}
    assert (0.0, 0.0) not in ks
    assert (1.0, -1.0) in ks
