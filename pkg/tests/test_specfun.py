import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isogeom import specfun as sf


def test_log_gamma_known_values():
    assert sf.log_gamma(1.0) == 0.0
    assert sf.log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-14)
    assert sf.log_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-14)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.7, 3.3, 25.0, 100.5, 170.0])
def test_log_gamma_matches_gamma(x):
    assert abs(math.exp(sf.log_gamma(x)) - math.gamma(x)) / math.gamma(x) <= 1e-13


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_log_gamma_domain(x):
    with pytest.raises(ValueError):
        sf.log_gamma(x)


def test_sphere_volume_examples():
    assert sf.sphere_volume(0) == pytest.approx(2.0, rel=1e-15)
    assert sf.sphere_volume(1) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sf.sphere_volume(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sf.sphere_volume(3) == pytest.approx(2 * math.pi**2, rel=1e-15)


@pytest.mark.parametrize("k", range(0, 65))
def test_sphere_volume_gamma_identity(k):
    lhs = sf.sphere_volume(k) * math.gamma((k + 1) / 2)
    rhs = 2 * math.pi ** ((k + 1) / 2)
    assert abs(lhs - rhs) / rhs <= 1e-12


def test_cap_volume_examples():
    assert sf.cap_volume(3, -1.0) == pytest.approx(2 * math.pi**2, rel=1e-14)
    assert sf.cap_volume(5, 0.0) == pytest.approx(sf.sphere_volume(5) / 2, rel=1e-14)
    assert sf.cap_volume(2, 0.5) == pytest.approx(math.pi, rel=1e-14)
    assert sf.cap_volume(4, 1.0) == 0.0
    assert sf.cap_volume(4, 2.0) == 0.0
    assert sf.cap_volume(4, -3.0) == pytest.approx(sf.sphere_volume(4))


# Reference values from 30-digit mpmath quadrature of ϖ_{d-1} ∫_t^1 (1-τ²)^{d/2-1} dτ.
@pytest.mark.parametrize(
    "d,t,expected",
    [
        (1, 0.3, 2.53220734555899822909726362028),
        (2, 0.5, 3.14159265358979323846264338328),
        (3, -0.2, 12.3660213674387857033889981466),
        (7, 0.9, 0.015310473934597815156094150958),
        (40, 0.1, 1.51994785240705548221007629035e-8),
        (200, 0.05, 4.73302058269516651174599931317e-108),
    ],
)
def test_cap_volume_against_high_precision_quadrature(d, t, expected):
    assert sf.cap_volume(d, t) == pytest.approx(expected, rel=1e-11)


@pytest.mark.parametrize("d", range(1, 61))
def test_cap_volume_symmetry(d):
    t = np.arange(-1000, 1001) * 1e-3
    total = sf.cap_volume(d, t) + sf.cap_volume(d, -t)
    assert np.max(np.abs(total / sf.sphere_volume(d) - 1.0)) <= 1e-10


@pytest.mark.parametrize("d,lo", [(1, -0.9), (2, -0.9), (3, -0.9), (4, -0.9), (7, -0.9), (12, -0.9), (30, 0.0)])
def test_cap_volume_derivative(d, lo):
    # for large d and t near -1 the difference quotient cancels against a value near ϖ_d
    t = np.linspace(lo, 0.9, 37)
    h = 1e-5
    fd = (sf.cap_volume(d, t + h) - sf.cap_volume(d, t - h)) / (2 * h)
    exact = -sf.sphere_volume(d - 1) * (1 - t * t) ** (d / 2 - 1)
    assert np.max(np.abs(fd / exact - 1)) <= 1e-6


@given(d=st.integers(1, 80), t1=st.floats(-1.5, 1.5), t2=st.floats(-1.5, 1.5))
def test_cap_volume_non_increasing(d, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    assert sf.cap_volume(d, lo) >= sf.cap_volume(d, hi)
    assert 0.0 <= sf.cap_volume(d, hi) <= sf.sphere_volume(d) * (1 + 1e-15)


def test_erfc_paper():
    assert sf.erfc_paper(0.0) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-15)
    assert 0.0 <= sf.erfc_paper(40.0) <= 1e-300
    assert abs(sf.erfc_paper(-40.0) - math.sqrt(math.pi)) <= 1e-13


def test_phi_ratio_examples():
    assert sf.phi_ratio(1.0, 5.0) == pytest.approx(1.0, rel=1e-14)
    assert sf.phi_ratio(0.0, 3.0) == 1.0
    assert sf.phi_ratio(0.5, 2.0) == pytest.approx(1.06384608107048714, rel=1e-13)
    assert sf.phi_ratio(0.7, 1e7) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        sf.phi_ratio(0.5, 0.0)
    with pytest.raises(ValueError):
        sf.phi_ratio(-2.0, 1.0)


_LOG_GRID = np.geomspace(0.1, 1e4, 400)


@pytest.mark.parametrize("b", [0.3, 0.7])
def test_phi_ratio_decreasing(b):
    assert np.all(np.diff(sf.phi_ratio(b, _LOG_GRID)) < 0)


@pytest.mark.parametrize("b", [1.5, 3.0, 10.0])
def test_phi_ratio_increasing(b):
    assert np.all(np.diff(sf.phi_ratio(b, _LOG_GRID)) > 0)


def test_phi_ratio_increasing_negative_b():
    t = np.geomspace(0.4 + 1e-3, 1e4, 400)
    assert np.all(np.diff(sf.phi_ratio(-0.4, t)) > 0)


def test_stirling_defect_examples():
    assert sf.stirling_defect(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-14)
    assert sf.stirling_defect(1.0) == pytest.approx(0.5, rel=1e-14)
    # f(t) = ln√(2π/e) + 1/(12t) + O(t^-3)
    limit = 0.5 * math.log(2 * math.pi / math.e)
    assert abs(sf.stirling_defect(50.0) - limit - 1 / 600) <= 1e-6
    assert abs(sf.stirling_defect(1e6) - limit) <= 1e-6


def test_stirling_defect_strictly_decreasing():
    t = np.linspace(0.5, 200, 4000)[1:]
    assert np.all(np.diff(sf.stirling_defect(t)) < 0)


def test_gamma_inequality_strict():
    t = np.linspace(0.5, 200, 20001)[1:]
    g = np.exp(sf.stirling_defect(t)) / math.sqrt(math.pi)
    assert np.all(g < 1.0)
    assert np.all(g > math.sqrt(2 / math.e))
