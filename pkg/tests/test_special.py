import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrouter.special import XI0, bessel_j0, bessel_j1, j0_zeros, nearest_j0_zero


def j0_quadrature(x, n=2048):
    """J0(x) = (1/pi) int_0^pi cos(x sin t) dt; the trapezoid rule is spectrally accurate here."""
    t = np.linspace(0.0, math.pi, n + 1)
    f = np.cos(x * np.sin(t))
    return (f.sum() - 0.5 * (f[0] + f[-1])) * (math.pi / n) / math.pi


def j1_quadrature(x, n=2048):
    t = np.linspace(0.0, math.pi, n + 1)
    f = np.cos(t - x * np.sin(t))
    return (f.sum() - 0.5 * (f[0] + f[-1])) * (math.pi / n) / math.pi


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 2.4, 5.0, 7.99, 8.0, 8.01, 12.5, 24.9, 25.1, 40.0, 80.0])
def test_j0_matches_quadrature_across_regimes(x):
    assert abs(bessel_j0(x) - j0_quadrature(x)) < 1e-12


@given(st.floats(min_value=-120.0, max_value=120.0))
@settings(max_examples=300, deadline=None)
def test_j0_against_quadrature_property(x):
    assert abs(bessel_j0(x) - j0_quadrature(x, 4096)) < 1e-12


@given(st.floats(min_value=0.0, max_value=60.0))
@settings(max_examples=100, deadline=None)
def test_j0_even_and_bounded(x):
    assert bessel_j0(x) == bessel_j0(-x)
    assert abs(bessel_j0(x)) <= 1.0


@pytest.mark.parametrize("x", [0.5, 3.0, 9.0, 20.0, 30.0])
def test_j1_matches_quadrature(x):
    assert abs(bessel_j1(x) - j1_quadrature(x)) < 1e-12
    assert bessel_j1(-x) == -bessel_j1(x)


def test_array_input_keeps_shape():
    x = np.linspace(0, 30, 12).reshape(3, 4)
    out = bessel_j0(x)
    assert out.shape == (3, 4)
    assert out[0, 0] == 1.0


def test_first_zero():
    assert abs(XI0 - 2.404825557695773) < 1e-14
    assert abs(bessel_j0(XI0)) < 1e-15


def test_zeros_are_roots_and_increasing():
    z = j0_zeros(10)
    assert np.all(np.diff(z) > 2.9)
    for r in z:
        assert abs(j0_quadrature(r)) < 1e-12
    assert abs(z[1] - 5.520078110286311) < 1e-12


def test_nearest_zero():
    assert nearest_j0_zero(5.0) == pytest.approx(5.520078110286311, abs=1e-12)
    assert nearest_j0_zero(-2.0) == pytest.approx(XI0, abs=1e-14)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        bessel_j0(float("nan"))
