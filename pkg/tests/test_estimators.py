import csv
import math

import numpy as np
import pytest
from scipy import special

from isogeom import estimators as es
from isogeom import manifold as mf
from isogeom.sampling import PolynomialSample, SeedPolicy, sample_uniform_sphere

CIRCLE1 = mf.make_circle_space([1])
TORUS = mf.make_torus_space([(1, 0)])
SPHERE1 = mf.make_sphere_space([1])
SQRT2_SIN = PolynomialSample(CIRCLE1, [0.0, 1.0])


def _samples(spec, n, seed=21):
    return [sample_uniform_sphere(spec, SeedPolicy(seed, i)) for i in range(n)]


def _companion_count(u, level):
    """Independent oracle: roots of the trigonometric polynomial via z = e^{iθ}."""
    K = max(b.tag[1] for b in u.spec.blocks)
    coef = np.zeros(2 * K + 1, dtype=complex)  # index j <-> z^(j-K)
    coef[K] -= level
    for block, sl in zip(u.spec.blocks, u.spec.block_slices):
        k = block.tag[1]
        a, b = u.coeffs[sl] * math.sqrt(2)
        coef[K + k] += a / 2 + b / 2j
        coef[K - k] += a / 2 - b / 2j
    roots = np.roots(coef[::-1])
    return int(np.sum(np.abs(np.abs(roots) - 1) < 1e-7))


# -- circle -------------------------------------------------------------------------------


def test_sin_examples():
    assert es.count_zeros_circle(SQRT2_SIN, 0.0) == 2
    assert es.count_zeros_circle(SQRT2_SIN, 1.5) == 0
    assert es.leray_coarea(SQRT2_SIN, 0.0, 64).value == pytest.approx(math.sqrt(2), rel=1e-12)
    assert es.leray_eps_shell(SQRT2_SIN, 0.0, 1e-3, 64).value == pytest.approx(math.sqrt(2), rel=1e-6)
    assert es.leray_eps_shell(SQRT2_SIN, 2.0, 1e-3, 64).value == 0.0
    assert es.leray_coarea(SQRT2_SIN, 2.0, 64).value == 0.0
    expected = math.pi - 2 * math.asin(0.5 / math.sqrt(2))
    assert es.excursion_volume(SQRT2_SIN, 0.5, 64).value == pytest.approx(expected, rel=1e-11)
    assert es.excursion_volume(SQRT2_SIN, -5.0, 64).value == pytest.approx(2 * math.pi)
    assert es.lp_norm(SQRT2_SIN, 4, 64) ** 4 == pytest.approx(1.5, rel=1e-12)
    assert es.sup_norm(SQRT2_SIN, 64).value == pytest.approx(math.sqrt(2), abs=1e-10)


def test_roots_are_accurate():
    u = sample_uniform_sphere(mf.make_circle_space(range(1, 6)), SeedPolicy(3, 3))
    roots = es.circle_roots(u, 0.3)
    assert np.all(np.abs(u.evaluate(roots) - 0.3) <= 1e-10)


@pytest.mark.parametrize("K", [[1], [1, 2, 3, 4, 5], list(range(1, 21)), [3, 17]])
def test_zero_count_matches_companion_roots(K):
    sp = mf.make_circle_space(K)
    for u in _samples(sp, 40):
        for level in (0.0, 0.4 * sp.c * 0.5):
            assert es.count_zeros_circle(u, level) == _companion_count(u, level)


def test_zero_count_scale_equivariant():
    sp = mf.make_circle_space(range(1, 6))
    for u in _samples(sp, 30):
        for level in (0.0, 0.7, -1.1):
            base = es.count_zeros_circle(u, level)
            for r in (0.5, 2.0, 10.0):
                assert es.count_zeros_circle(u.scaled(r), r * level) == base


def test_zero_count_grid_guard():
    u = _samples(mf.make_circle_space([10]), 1)[0]
    with pytest.raises(ValueError):
        es.count_zeros_circle(u, 0.0, grid_n=40)
    with pytest.raises(ValueError):
        es.nodal_length_2d(SQRT2_SIN, 0.0, 64)


def test_grid_node_on_level_is_handled():
    # √2 sin vanishes at the node θ = 0 of the unshifted grid
    assert es.count_zeros_circle(SQRT2_SIN, 0.0, grid_n=64) == 2


# -- two-dimensional level sets ------------------------------------------------------------


def test_torus_vertical_circles():
    u = PolynomialSample(TORUS, [1.0, 0.0, 0.0, 0.0])  # √2 cos x
    line = es.nodal_length_2d(u, 0.0, 64)
    assert line.total_length == pytest.approx(4 * math.pi, rel=1e-3)
    assert line.flags  # the level passes through grid nodes, so a shifted grid was used


def test_sphere_great_circle():
    for u in _samples(SPHERE1, 10):
        line = es.nodal_length_2d(u, 0.0, 64)
        assert line.total_length == pytest.approx(2 * math.pi, rel=2e-3)
        assert np.allclose(np.linalg.norm(line.segments, axis=-1), 1.0)


@pytest.mark.parametrize("spec", [TORUS, mf.make_sphere_space([4]), mf.make_torus_space([(1, 2)])], ids=["torus", "sphere4", "torus12"])
def test_polyline_endpoints_on_level(spec):
    u = _samples(spec, 1)[0]
    line = es.nodal_length_2d(u, 0.3, 128)
    pts = line.segments.reshape(-1, 3)
    if spec.manifold.id is mf.ManifoldId.TORUS2:
        pts = pts[:, :2]
    # linear interpolation is exact to O(h²)
    assert np.max(np.abs(u.evaluate(pts) - 0.3)) <= 0.02
    assert line.total_length == pytest.approx(np.sum(line.lengths))


def test_polyline_csv(tmp_path):
    u = _samples(SPHERE1, 1)[0]
    line = es.nodal_length_2d(u, 0.2, 32)
    path = tmp_path / "line.csv"
    line.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "y0", "z0", "x1", "y1", "z1"]
    assert len(rows) == len(line) + 1


def test_empty_level_sets():
    u = _samples(TORUS, 1)[0]
    assert es.nodal_length_2d(u, 3.0, 64).total_length == 0.0
    assert es.leray_coarea(u, 3.0, 64).value == 0.0
    assert es.leray_eps_shell(u, 3.0, 1e-3, 64).value == 0.0
    assert es.excursion_volume(u, -3.0, 64).value == pytest.approx(TORUS.volume)
    assert es.excursion_volume(u, 3.0, 64).value == 0.0


@pytest.mark.parametrize("spec,R", [(TORUS, 256), (mf.make_sphere_space([4]), 128), (mf.make_torus_space([(1, 2)]), 256)], ids=["torus", "sphere4", "torus12"])
def test_grid_convergence(spec, R):
    for u in _samples(spec, 5):
        a = es.nodal_length_2d(u, 0.1, R).total_length
        b = es.nodal_length_2d(u, 0.1, 2 * R).total_length
        assert abs(a / b - 1) <= 5e-3
        va = es.excursion_volume(u, 0.1, R, "subcell").value
        vb = es.excursion_volume(u, 0.1, 2 * R, "subcell").value
        assert abs(va / vb - 1) <= 2e-3


def test_wavelength_guard():
    sp = mf.make_sphere_space([20])
    u = _samples(sp, 1)[0]
    with pytest.raises(ValueError):
        es.nodal_length_2d(u, 0.0, 64)
    es.nodal_length_2d(u, 0.0, 96)


def _min_level_gradient(u, level, R):
    if u.spec.m == 1:
        roots = es.circle_roots(u, level, R)
        return np.min(np.abs(u.gradient(roots)), initial=np.inf)
    line = es.nodal_length_2d(u, level, R)
    return np.min(np.linalg.norm(u.gradient(line.midpoints), axis=-1), initial=np.inf)


@pytest.mark.parametrize("spec", [CIRCLE1, mf.make_circle_space(range(1, 6)), TORUS, mf.make_sphere_space([2])], ids=["circle1", "circle5", "torus", "sphere2"])
def test_leray_estimators_agree(spec):
    R = 64 if spec.m == 1 else 256
    level, checked = 0.25, 0
    for u in _samples(spec, 100):
        # keep away from critical levels, where the shell and coarea limits differ
        if _min_level_gradient(u, level, R) < 0.1 * spec.kappa:
            continue
        coarea = es.leray_coarea(u, level, R).value
        shell = es.leray_eps_shell(u, level, 1e-3, R).value
        if coarea == 0.0:
            assert shell == 0.0
            continue
        assert abs(coarea / shell - 1) <= 0.01
        checked += 1
    assert checked >= 60


def test_subcell_excursion_tracks_quadrature():
    for u in _samples(TORUS, 5):
        q = es.excursion_volume(u, 0.2, 256).value
        s = es.excursion_volume(u, 0.2, 256, "subcell").value
        assert abs(q - s) <= 2e-3 * TORUS.volume


# -- norms --------------------------------------------------------------------------------


@pytest.mark.parametrize("spec", [mf.make_circle_space(range(1, 4)), TORUS, mf.make_sphere_space([3])], ids=["circle", "torus", "sphere"])
def test_l2_norm_is_one(spec):
    for u in _samples(spec, 10):
        assert es.lp_norm(u, 2, 64) == pytest.approx(1.0, abs=1e-8)


def test_negative_power_integral():
    # E|sin θ|^a = Γ((a+1)/2) / (√π Γ(a/2 + 1))
    for a in (-0.3, -0.5, -0.8):
        exact = 2 ** (a / 2) * special.gamma((a + 1) / 2) / (math.sqrt(math.pi) * special.gamma(a / 2 + 1))
        assert es.integral_abs_power(SQRT2_SIN, a, 4096) == pytest.approx(exact, rel=5e-3)
    with pytest.raises(ValueError):
        es.integral_abs_power(SQRT2_SIN, -1.0, 64)
    with pytest.raises(ValueError):
        es.lp_norm(SQRT2_SIN, 0.5, 64)


@pytest.mark.parametrize("spec", [mf.make_circle_space(range(1, 5)), mf.make_torus_space([(1, 1)]), mf.make_sphere_space([3])], ids=["circle", "torus", "sphere"])
def test_sup_attained_at_evaluation_functional(spec):
    q = spec.manifold.random_points(np.random.default_rng(0), 1)
    coeffs = spec.evaluate(q)[:, 0] / spec.c
    u = PolynomialSample(spec, coeffs)
    sup = es.sup_norm(u, 64)
    assert sup.value == pytest.approx(spec.c, rel=1e-8)
    assert sup.value <= spec.c * (1 + 1e-12)


@pytest.mark.parametrize("spec", [mf.make_circle_space(range(1, 5)), TORUS, mf.make_sphere_space([2, 4])], ids=["circle", "torus", "sphere"])
def test_sup_certificate(spec):
    for u in _samples(spec, 10):
        sup = es.sup_norm(u, 64)
        h = mf.quadrature_grid(spec.manifold, 64).covering_radius
        assert sup.certified_upper - sup.grid_max <= u.lipschitz * h * (1 + 1e-12)
        assert sup.grid_max <= sup.value <= sup.certified_upper
        assert sup.value <= spec.c * (1 + 1e-12)


@pytest.mark.parametrize("spec", [mf.make_circle_space(range(1, 6)), TORUS, mf.make_torus_space([(2, 1)]), mf.make_sphere_space([1, 3])], ids=["circle", "torus", "torus21", "sphere"])
def test_lipschitz_bound(spec):
    rng = np.random.default_rng(5)
    p = spec.manifold.random_points(rng, 2000)
    if spec.m == 1:
        q = p + rng.uniform(-0.3, 0.3, p.shape)
    elif spec.manifold.id is mf.ManifoldId.TORUS2:
        q = p + rng.uniform(-0.3, 0.3, p.shape)
    else:
        q = p + 0.2 * rng.standard_normal(p.shape)
        q /= np.linalg.norm(q, axis=1, keepdims=True)
    for u in _samples(spec, 20):
        assert np.max(es.lipschitz_ratio(u, p, q)) < spec.kappa


@pytest.mark.parametrize("spec", [mf.make_circle_space([1, 2]), TORUS, mf.make_sphere_space([2])], ids=["circle", "torus", "sphere"])
def test_inkkr_inequality(spec):
    for u in _samples(spec, 20):
        for a in (2, 4):
            lhs, rhs = es.inkkr_bound(u, a, 64)
            assert lhs <= rhs


# -- common zeros -------------------------------------------------------------------------


def test_common_zeros_of_coordinate_cosines():
    u1 = PolynomialSample(TORUS, [1.0, 0.0, 0.0, 0.0])
    u2 = PolynomialSample(TORUS, [0.0, 0.0, 1.0, 0.0])
    res = es.common_zero_count(u1, u2, 64)
    assert res.count == 4
    expected = {(0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5)}
    # linear interpolants place the points to O(h²)
    got = {tuple(np.round(p / math.pi, 3)) for p in res.points}
    assert got == expected


def test_sphere_degree_one_pairs_meet_twice():
    us = _samples(SPHERE1, 20)
    vs = _samples(SPHERE1, 20, seed=22)
    for u, v in zip(us, vs):
        res = es.common_zero_count(u, v, 64)
        assert res.count == 2
        # the two points are antipodal and lie on both great circles
        assert np.allclose(res.points[0], -res.points[1], atol=1e-10)
        assert np.max(np.abs(u.evaluate(res.points))) <= 1e-10


def test_common_zeros_requires_surface():
    with pytest.raises(ValueError):
        es.common_zero_count(SQRT2_SIN, SQRT2_SIN, 64)
