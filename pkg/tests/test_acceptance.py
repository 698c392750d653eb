"""The ten acceptance criteria at their stated sample sizes and tolerances.

Each test records one PASS/FAIL line, shown in the "acceptance criteria"
section of the pytest summary. Seeds are fixed once per criterion.
"""

import math
import time

import numpy as np
import pytest

from isogeom import closedform as cf
from isogeom import harness as hs
from isogeom import manifold as mf

pytestmark = pytest.mark.slow


def _config(text: str, seed: int) -> hs.ExperimentConfig:
    return hs.parse_config(text + f"\nmaster_seed = {seed}\n")


def _summary(rep: hs.ComparisonReport) -> str:
    t = "" if rep.t_scaled is None else f"t={rep.t_scaled:g} "
    stage = "" if rep.stage == 1 else " (after 4N rerun)"
    return f"{t}mean={rep.mean:.5g}±{rep.stderr:.2g} vs {rep.closed_form.value:.5g} z={rep.z:.2f}{stage}"


def test_c01_zero_count(criterion):
    details, ok = [], True
    expected = {1: 2.0, 5: 2 * math.sqrt(11), 20: 2 * math.sqrt(143.5)}
    for n, value in expected.items():
        cfg = _config(f"manifold = circle\nspectrum = 1..{n}\nquantity = zeros\nlevels = 0\nsamples = 2000", 1001 + n)
        start = time.perf_counter()
        res = hs.simulate(cfg, threads=1)
        elapsed = time.perf_counter() - start
        rep = res.reports[0]
        cell = rep.verdict == "pass" and abs(rep.closed_form.value - value) <= 1e-12 * value and elapsed < 60
        ok &= cell
        details.append(f"n={n} {_summary(rep)} {elapsed:.0f}s")
    assert criterion("1 zero count on the circle", ok, "; ".join(details))


def test_c02_l1_moment(criterion):
    exact = cf.moment_formula(1, 1)
    formula_ok = abs(exact - 2 * math.sqrt(2) / math.pi) <= 1e-14
    cfg = _config("manifold = circle\nspectrum = 1\nquantity = int_abs_pow(1)\nsamples = 10000", 2002)
    start = time.perf_counter()
    rep = hs.simulate(cfg, threads=1).reports[0]
    elapsed = time.perf_counter() - start
    ok = formula_ok and rep.verdict == "pass" and elapsed < 60
    assert criterion("2 L1 moment", ok, f"formula err {abs(exact - 2 * math.sqrt(2) / math.pi):.1e}; {_summary(rep)} {elapsed:.0f}s")


def test_c03_nodal_length(criterion):
    torus = mf.make_torus_space([(1, 0)])
    assert torus.d == 3 and torus.s == pytest.approx(math.sqrt(0.5), rel=1e-15)
    cfg = _config("manifold = torus\nspectrum = (1,0)\nquantity = level_measure\nlevels = 0, 0.5\nsamples = 10000\nresolution = 256", 3003)
    start = time.perf_counter()
    res = hs.simulate(cfg, threads=1)
    t_torus = time.perf_counter() - start
    details, ok = [], t_torus < 600
    for rep in res.reports:
        t = rep.t_scaled
        # ϖ (ϖ₁/ϖ₂) s (1-t²)^{(d-1)/2} with ϖ = 4π², ϖ₁/ϖ₂ = 1/2, d = 3
        oracle = 4 * math.pi**2 * 0.5 * math.sqrt(0.5) * (1 - t * t)
        ok &= rep.verdict == "pass" and abs(rep.closed_form.value - oracle) <= 1e-12 * oracle
        details.append("torus " + _summary(rep))
    cfg = _config("manifold = sphere\nspectrum = 4\nquantity = level_measure\nlevels = 0\nsamples = 3000\nresolution = 128", 3004)
    start = time.perf_counter()
    rep = hs.simulate(cfg, threads=1).reports[0]
    t_sphere = time.perf_counter() - start
    ok &= rep.verdict == "pass" and abs(rep.closed_form.value - 2 * math.pi * math.sqrt(10)) <= 1e-12 * 20 and t_sphere < 600
    details.append(f"sphere {_summary(rep)}; {t_torus:.0f}s + {t_sphere:.0f}s")
    assert criterion("3 nodal length", ok, "; ".join(details))


def test_c04_excursion_volume(criterion):
    cfg = _config("manifold = sphere\nspectrum = 1\nquantity = excursion\nlevels = -0.5, 0, 0.5\nsamples = 10000", 4004)
    start = time.perf_counter()
    res = hs.simulate(cfg, threads=1)
    elapsed = time.perf_counter() - start
    oracle = {-0.5: 3 * math.pi, 0.0: 2 * math.pi, 0.5: math.pi}
    ok = elapsed < 300
    for rep in res.reports:
        ok &= rep.verdict == "pass" and abs(rep.closed_form.value - oracle[rep.t_scaled]) <= 1e-12 * 10
    assert criterion("4 excursion volume", ok, "; ".join(_summary(r) for r in res.reports) + f"; {elapsed:.0f}s")


def test_c05_leray(criterion):
    volume = 4 * math.pi**2
    details, ok = [], True
    start = time.perf_counter()
    for law, oracle in (("uniform_sphere", 4 * math.pi), ("gaussian_normalized", volume / math.sqrt(2 * math.pi))):
        for quantity in ("leray_shell", "leray_coarea"):
            cfg = _config(f"manifold = torus\nspectrum = (1,0)\ndistribution = {law}\nquantity = {quantity}\nlevels = 0\nsamples = 10000\nresolution = 256\nepsilon = 0.01", 5005)
            rep = hs.simulate(cfg, threads=1).reports[0]
            ok &= rep.verdict == "pass" and abs(rep.closed_form.value - oracle) <= 1e-12 * oracle
            details.append(f"{law}/{quantity} {_summary(rep)}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    assert criterion("5 Leray measure", ok, "; ".join(details) + f"; {elapsed:.0f}s")


def test_c06_common_zeros(criterion):
    details, ok = [], True
    start = time.perf_counter()
    for manifold, spectrum, oracle in (("torus", "(1,0)", math.pi), ("sphere", "1", 2.0)):
        cfg = _config(f"manifold = {manifold}\nspectrum = {spectrum}\nquantity = common_zeros\nlevels = 0\nsamples = 10000", 6006)
        rep = hs.simulate(cfg, threads=1).reports[0]
        ok &= rep.verdict == "pass" and abs(rep.closed_form.value - oracle) <= 1e-12 * oracle
        details.append(f"{manifold} {_summary(rep)}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    assert criterion("6 common zeros", ok, "; ".join(details) + f"; {elapsed:.0f}s")


def test_c07_moment_quadrature(criterion):
    start = time.perf_counter()
    worst = 0.0
    for a in (0.5, 1.0, 3.0, 6.0):
        for d in (1, 2, 5, 20, 100):
            c = math.sqrt(d + 1)
            quad = cf.functional_mean_value(d, c, lambda x, a=a: abs(x) ** a, breakpoints=(0.0,))
            worst = max(worst, abs(quad / cf.moment_value(a, d) - 1))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1
    assert criterion("7 moment vs quadrature", ok, f"worst relative error {worst:.1e}, {elapsed * 1e3:.0f} ms")


def test_c08_bounds(criterion):
    start = time.perf_counter()
    details, ok = [], True
    for manifold, spectrum in (("circle", "1..5"), ("torus", "(1,0),(1,1)"), ("sphere", "4")):
        cfg = _config(f"manifold = {manifold}\nspectrum = {spectrum}\nquantity = lp(8)\nsamples = 5000", 8008)
        res = hs.bounds(cfg, threads=1)
        rows = {(r["check"], r["a"]): r for r in res.rows}
        for a in (2.0, 4.0, 8.0):
            row = rows[("empirical_lp", a)]
            ok &= row["N"] == 5000 and row["value"] < math.sqrt((a + 1) / math.e)
        for a in hs.INKKR_POWERS:
            ok &= rows[("sup_by_lp_samplewise", a)]["passed"]
        ok &= res.passed
        emp = ", ".join(f"a={a:g}: {rows[('empirical_lp', a)]['value']:.4f}" for a in (2.0, 4.0, 8.0))
        details.append(f"{manifold} {emp}")
    gamma_ok, up, lo = hs.inega_check()
    ok &= gamma_ok
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    assert criterion("8 bounds", ok, "; ".join(details) + f"; Gamma gaps {up:.1e}/{lo:.1e}; {elapsed:.0f}s")


def test_c09_derivative_identity(criterion):
    start = time.perf_counter()
    worst = 0.0
    for d in (2, 3, 5, 20):
        c = math.sqrt(d + 1)
        h = 1e-3 * c
        for t in np.linspace(-0.9, 0.9, 37):
            f = lambda level: cf.excursion_volume_value(1.0, d, level / c)
            L = c * t
            d1 = (f(L - h / 2) - f(L + h / 2)) / h
            d2 = (f(L - h) - f(L + h)) / (2 * h)
            leray = cf.leray_value(1.0, d, c, float(t))
            worst = max(worst, abs((4 * d1 - d2) / 3 / leray - 1))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed < 1
    assert criterion("9 derivative identity", ok, f"worst relative error {worst:.1e}, {elapsed * 1e3:.0f} ms")


def test_c10_property_suites(criterion):
    suites = hs.selftest((1, 4, 16))
    failed = [f"{s.name}: {', '.join(s.failures)}" for s in suites if not s.passed]
    ok = not failed
    names = ", ".join(s.name for s in suites)
    assert criterion("10 property suites", ok, f"{names}" + (f"; failed {failed}" if failed else " all pass"))
