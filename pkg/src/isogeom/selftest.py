"""Reduced invariant suites run by ``isogeom selftest``.

Each ``*_checks`` returns (label, zero-argument predicate) pairs; sizes are
chosen so the whole run takes well under a minute.
"""

from __future__ import annotations

import math

import numpy as np

from . import closedform as cf
from . import estimators as es
from . import manifold as mf
from . import sampling as sm
from . import specfun as sf


def _close(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def specfun_checks():
    def gamma_factorials():
        return all(_close(math.exp(sf.log_gamma(k + 1)), math.factorial(k), 1e-12) for k in range(0, 25))

    def gamma_half():
        return _close(math.exp(sf.log_gamma(0.5)), math.sqrt(math.pi), 1e-14)

    def volumes():
        return _close(sf.sphere_volume(1), 2 * math.pi, 1e-14) and _close(sf.sphere_volume(2), 4 * math.pi, 1e-14)

    def cap_half():
        return all(abs(sf.cap_fraction(d, 0.0) - 0.5) <= 1e-15 for d in (1, 2, 5, 40))

    def inega():
        from .harness import inega_check

        return inega_check(np.linspace(0.5, 200, 2001)[1:])[0]

    return [("Gamma(k+1) = k!", gamma_factorials), ("Gamma(1/2)", gamma_half), ("sphere volumes", volumes), ("half cap", cap_half), ("Gamma inequality", inega)]


_SPACES = {
    "circle 1..3": lambda: mf.make_circle_space(range(1, 4)),
    "torus (1,0),(1,1)": lambda: mf.make_torus_space([(1, 0), (1, 1)]),
    "sphere 1,2": lambda: mf.make_sphere_space([1, 2]),
}


def manifold_checks():
    out = []
    for label, make in _SPACES.items():
        sp = make()
        grid = mf.quadrature_grid(sp.manifold, 32)
        rng = np.random.default_rng(0)

        def gram(sp=sp, grid=grid):
            E = sp.evaluate(grid.points)
            return np.max(np.abs((E * grid.weights) @ E.T - np.eye(sp.dim))) <= 1e-10

        def kernel(sp=sp, rng=rng):
            return mf.kernel_diagonal_check(sp, sp.manifold.random_points(rng, 50)) <= 1e-10 * sp.dim

        def rayleigh(sp=sp, grid=grid):
            _, G = sp.evaluate_with_gradient(grid.points)
            for block, sl in zip(sp.blocks, sp.block_slices):
                v = np.zeros(sp.dim)
                v[sl] = 1.0
                grad = np.tensordot(v, G, axes=1)
                if not _close(np.sum(grid.weights * np.sum(grad**2, axis=-1)), block.lam * block.dim, 1e-6):
                    return False
            return True

        def gradient(sp=sp, rng=rng):
            pts = sp.manifold.random_points(rng, 20)
            u = sm.PolynomialSample(sp, rng.standard_normal(sp.dim))
            h = 1e-5
            if sp.m == 1:
                fd = (u.evaluate(pts + h) - u.evaluate(pts - h)) / (2 * h)
                return np.max(np.abs(u.gradient(pts)[:, 0] - fd)) <= 1e-6 * u.lipschitz
            if sp.manifold.id is mf.ManifoldId.TORUS2:
                fd = np.stack([(u.evaluate(pts + e) - u.evaluate(pts - e)) / (2 * h) for e in np.eye(2) * h], axis=-1)
                return np.max(np.abs(u.gradient(pts) - fd)) <= 1e-6 * u.lipschitz
            pts = pts[np.abs(pts[:, 2]) < 0.9]
            th, ph = np.arccos(pts[:, 2]), np.arctan2(pts[:, 1], pts[:, 0])
            d_th = (u.evaluate(mf.sphere_point(th + h, ph)) - u.evaluate(mf.sphere_point(th - h, ph))) / (2 * h)
            d_ph = (u.evaluate(mf.sphere_point(th, ph + h)) - u.evaluate(mf.sphere_point(th, ph - h))) / (2 * h) / np.sin(th)
            return np.max(np.abs(u.gradient(pts) - np.stack([d_th, d_ph], axis=-1))) <= 1e-6 * u.lipschitz

        out += [(f"{label}: Gram identity", gram), (f"{label}: kernel diagonal", kernel), (f"{label}: Rayleigh identity", rayleigh), (f"{label}: gradient", gradient)]
    return out


def closedform_checks():
    circle5 = mf.make_circle_space(range(1, 6))
    sphere4 = mf.make_sphere_space([4])

    def qualls():
        return _close(cf.expected_level_measure(circle5, 0.0).value, 2 * math.sqrt(11), 1e-14)

    def sphere_length():
        return _close(cf.expected_level_measure(sphere4, 0.0).value, 2 * math.pi * math.sqrt(10), 1e-13)

    def half_excursion():
        return _close(cf.expected_excursion_volume(sphere4, 0.0).value, 2 * math.pi, 1e-14)

    def l1_moment():
        return abs(cf.moment_value(1, 1) - 2 * math.sqrt(2) / math.pi) <= 1e-14

    def derivative():
        sp = mf.make_torus_space([(1, 0)])
        h = 1e-3 * sp.c
        for t in (-0.6, 0.0, 0.4, 0.8):
            f = lambda x: cf.expected_excursion_volume(sp, x / sp.c).value
            L = sp.c * t
            d1 = (f(L - h / 2) - f(L + h / 2)) / h
            d2 = (f(L - h) - f(L + h)) / (2 * h)
            if not _close((4 * d1 - d2) / 3, cf.expected_leray(sp, t).value, 1e-7):
                return False
        return True

    def functional():
        for a, d in ((0.5, 2), (3.0, 5)):
            sp_c = math.sqrt(d + 1)
            val = cf.functional_mean_value(d, sp_c, lambda x: abs(x) ** a, breakpoints=(0.0,))
            if not _close(val, cf.moment_value(a, d), 1e-10):
                return False
        return True

    def gaussian_remark():
        sp = mf.make_torus_space([(1, 0)])
        val = cf.gaussian_expectations(sp, cf.normalized_sigma(sp), 0.0).leray.value
        return _close(val, sp.volume / math.sqrt(2 * math.pi), 1e-14)

    return [
        ("circle zero count", qualls),
        ("sphere nodal length", sphere_length),
        ("half excursion", half_excursion),
        ("L1 moment", l1_moment),
        ("derivative identity", derivative),
        ("functional vs moment", functional),
        ("Gaussian Leray", gaussian_remark),
    ]


def sampling_checks():
    sp = mf.make_sphere_space([3])

    def reproducible():
        a = sm.sample_uniform_sphere(sp, sm.SeedPolicy(99, 7))
        b = sm.sample_uniform_sphere(sp, sm.SeedPolicy(99, 7))
        c = sm.sample_uniform_sphere(sp, sm.SeedPolicy(99, 8))
        return a.coeffs.tobytes() == b.coeffs.tobytes() and not np.array_equal(a.coeffs, c.coeffs)

    def unit_norm():
        return all(abs(sm.sample_uniform_sphere(sp, sm.SeedPolicy(1, i)).norm - 1) <= 1e-14 for i in range(50))

    def mean_square():
        draws = np.array([sm.sample_gaussian(sp, 1.0, sm.SeedPolicy(2, i)).coeffs for i in range(4000)])
        return abs(draws.var() - 0.5) <= 0.05

    return [("reproducible streams", reproducible), ("unit norm", unit_norm), ("Gaussian variance", mean_square)]


def estimator_checks():
    circle = mf.make_circle_space([1])
    torus = mf.make_torus_space([(1, 0)])
    sphere = mf.make_sphere_space([1])

    def sine_zeros():
        u = sm.PolynomialSample(circle, [0.0, 1.0])
        return es.count_zeros_circle(u, 0.0, 64) == 2

    def torus_cos():
        u = sm.PolynomialSample(torus, [1.0, 0.0, 0.0, 0.0])
        return _close(es.level_measure(u, 0.0, 128).value, 4 * math.pi, 1e-3)

    def great_circle():
        u = sm.PolynomialSample(sphere, [1.0, 0.0, 0.0])
        return _close(es.level_measure(u, 0.0, 128).value, 2 * math.pi, 5e-3)

    def leray_pair():
        u = sm.sample_uniform_sphere(torus, sm.SeedPolicy(3, 0))
        shell = es.leray_eps_shell(u, 0.3, 0.02, 256).value
        coarea = es.leray_coarea(u, 0.3, 256).value
        return _close(shell, coarea, 0.01)

    def common_zeros():
        u = sm.PolynomialSample(torus, [1.0, 0.0, 0.0, 0.0])
        v = sm.PolynomialSample(torus, [0.0, 0.0, 1.0, 0.0])
        return es.common_zero_count(u, v, 64).count == 4

    return [
        ("sine zero count", sine_zeros),
        ("torus cosine length", torus_cos),
        ("great circle", great_circle),
        ("Leray pair", leray_pair),
        ("common zeros", common_zeros),
    ]


_DETERMINISM_CONFIG = """
manifold = torus
spectrum = (1,0)
quantity = level_measure
levels = 0, 0.5
samples = 48
resolution = 64
master_seed = 20240607
"""


def harness_checks(thread_counts=(1, 4, 16)):
    from . import harness as hs

    def determinism():
        cfg = hs.parse_config(_DETERMINISM_CONFIG)
        digests = {hs.report_digest(hs.simulate(cfg, threads=n, retry=False).document()) for n in thread_counts}
        return len(digests) == 1

    def pairwise():
        x = np.random.default_rng(5).standard_normal(1001)
        mom = hs.pairwise_moments(x)
        return _close(mom.mean, float(np.mean(x)), 1e-12) and _close(mom.m2, float(np.sum((x - x.mean()) ** 2)), 1e-12)

    return [("identical reports across thread counts", determinism), ("pairwise moments", pairwise)]
