"""Exact expectations of level-set and excursion functionals of random polynomials.

All level arguments named ``t`` are *scaled*: the absolute level is c·t with
c = √(dim E), so for the uniform law on the unit sphere of E only t in [-1, 1]
gives non-empty level sets. Use :func:`scaled_level` / :func:`absolute_level`
to convert.

Integral functionals ∫_M f(u(p)) dp are taken with the probability measure dp,
so f ≡ 1 and f(t) = t² both average to 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .manifold import EigenspaceSpec, ManifoldModel
from .specfun import (
    cap_fraction,
    erfc_paper,
    log_gamma,
    log_sphere_volume,
    sphere_volume_ratio,
)

_QUAD_EPSREL = 1e-12


class QuadratureError(RuntimeError):
    """An adaptive quadrature did not reach its tolerance."""


@dataclass(frozen=True)
class ClosedForm:
    value: float
    formula_id: str
    inputs: dict = field(hash=False)

    def recompute(self) -> float:
        return _FORMULAS[self.formula_id](**self.inputs)

    def as_record(self) -> dict:
        rec = {"formula_id": self.formula_id, "value": self.value}
        for key, val in self.inputs.items():
            if isinstance(val, (int, float, str)):
                rec[key] = val
            elif isinstance(val, (list, tuple)):
                rec[key] = list(val)
            else:
                rec[key] = getattr(val, "name", repr(val))
        return rec


def scaled_level(spec: EigenspaceSpec, level: float) -> float:
    return level / spec.c


def absolute_level(spec: EigenspaceSpec, t_scaled: float) -> float:
    return t_scaled * spec.c


# -- primitive formulas (plain numbers in, float out) ----------------------------------


def level_measure_value(volume: float, m: int, s: float, d: int, t: float) -> float:
    # one code path with the l = 1 intersection, so the two agree bit for bit
    return intersection_measure_value(volume, m, [s], [d], [t])


def excursion_volume_value(volume: float, d: int, t: float) -> float:
    return volume * cap_fraction(d, t)


def intersection_measure_value(volume: float, m: int, s: Sequence[float], d: Sequence[int], t: Sequence[float]) -> float:
    l = len(s)
    if l > m:
        raise ValueError(f"cannot intersect {l} level sets on a {m}-dimensional manifold")
    out = sphere_volume_ratio(m - l, m) * volume
    for s_i, d_i, t_i in zip(s, d, t):
        if abs(t_i) > 1:
            raise ValueError(f"scaled level must lie in [-1, 1], got {t_i}")
        out *= s_i * (1.0 - t_i * t_i) ** ((d_i - 1) / 2)
    return out


def intersection_excursion_value(volume: float, d: Sequence[int], t: Sequence[float]) -> float:
    out = volume
    for d_i, t_i in zip(d, t):
        out *= cap_fraction(d_i, t_i)
    return out


def leray_prefactor(d: int, c: float) -> float:
    """ϖ_{d-1} / (c ϖ_d); tends to 1/√(2π) as d grows."""
    return math.exp(log_sphere_volume(d - 1) - log_sphere_volume(d)) / c


def leray_value(volume: float, d: int, c: float, t: float, strict: bool = True) -> float:
    a = abs(t)
    if a > 1:
        return 0.0
    if a == 1:
        if d <= 2:
            if strict:
                raise ValueError("Leray measure at |t| = 1 is unbounded for d <= 2")
            return math.inf
        return 0.0
    return volume * leray_prefactor(d, c) * (1.0 - t * t) ** (d / 2 - 1)


def moment_value(a: float, d: int) -> float:
    """Mean over the unit sphere of ∫_M |u|^a dp; independent of M."""
    if a <= -1:
        raise ValueError("moment exponent must exceed -1")
    log_e = (
        log_gamma((a + 1) / 2)
        + log_gamma((d + 1) / 2)
        + 0.5 * a * math.log(d + 1)
        - 0.5 * math.log(math.pi)
        - log_gamma((a + d + 1) / 2)
    )
    return math.exp(log_e)


def moment_limit(a: float) -> float:
    """Limit of the |u|^a moment as dim E -> ∞ (the standard normal absolute moment)."""
    if a <= -1:
        raise ValueError("moment exponent must exceed -1")
    return math.exp(0.5 * a * math.log(2) + log_gamma((a + 1) / 2) - 0.5 * math.log(math.pi))


def functional_mean_value(d: int, c: float, f: Callable[[float], float], breakpoints: Sequence[float] = ()) -> float:
    """(ϖ_{d-1}/ϖ_d) ∫_{-1}^{1} f(c x) (1-x²)^{d/2-1} dx.

    The endpoint factor (1∓x)^{d/2-1} is handled by QAWS algebraic weights, so
    d = 1 costs nothing extra. The range is split at 0 and at any scaled
    ``breakpoints`` where f is not smooth.
    """
    beta = d / 2 - 1
    cuts = sorted({-1.0, 0.0, 1.0, *(float(b) / c for b in breakpoints if -c < b < c)})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if lo == -1.0:
            g = lambda x: f(c * x) * (1.0 - x) ** beta  # noqa: E731
            wvar = (beta, 0.0)
        elif hi == 1.0:
            g = lambda x: f(c * x) * (1.0 + x) ** beta  # noqa: E731
            wvar = (0.0, beta)
        else:
            g = lambda x: f(c * x) * (1.0 - x * x) ** beta  # noqa: E731
            wvar = (0.0, 0.0)
        total += _quad(g, lo, hi, weight="alg", wvar=wvar)
    return total * sphere_volume_ratio(d - 1, d)


def _quad(func, lo, hi, **kwargs) -> float:
    kwargs.setdefault("limit", 400)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=_QUAD_EPSREL, **kwargs)
        except integrate.IntegrationWarning as exc:
            # roundoff near the requested tolerance is common for narrow or
            # endpoint-singular integrands; accept a looser but still tight estimate
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=1e-10, **kwargs)
            if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300):
                raise QuadratureError(str(exc)) from exc
    return val


def _quad_pieces(func, cuts, **kwargs) -> float:
    return sum(_quad(func, a, b, **kwargs) for a, b in zip(cuts[:-1], cuts[1:]) if b > a)


# -- spec-level API ---------------------------------------------------------------------


def expected_level_measure(spec: EigenspaceSpec, t: float) -> ClosedForm:
    """Mean (m-1)-measure of the level set {u = c t}; for the circle the mean number of points."""
    inputs = dict(volume=spec.volume, m=spec.m, s=spec.s, d=spec.d, t=float(t))
    return ClosedForm(level_measure_value(**inputs), "level_measure", inputs)


def expected_excursion_volume(spec: EigenspaceSpec, t: float) -> ClosedForm:
    inputs = dict(volume=spec.volume, d=spec.d, t=float(t))
    return ClosedForm(excursion_volume_value(**inputs), "excursion_volume", inputs)


def _check_same_manifold(specs):
    if not specs:
        raise ValueError("need at least one space")
    model = specs[0].manifold
    if any(sp.manifold != model for sp in specs):
        raise ValueError("all spaces must live on the same manifold")
    return model


def expected_intersection_measure(specs: Sequence[EigenspaceSpec], t: Sequence[float]) -> ClosedForm:
    """Mean measure of the common level set of independent u_i ∈ S_i (X = M).

    With as many factors as dim M this is the mean number of common points.
    """
    model = _check_same_manifold(specs)
    if len(t) != len(specs):
        raise ValueError("one level per space is required")
    inputs = dict(
        volume=model.total_volume,
        m=model.m,
        s=[sp.s for sp in specs],
        d=[sp.d for sp in specs],
        t=[float(x) for x in t],
    )
    return ClosedForm(intersection_measure_value(**inputs), "intersection_measure", inputs)


def expected_intersection_excursion(specs: Sequence[EigenspaceSpec], t: Sequence[float]) -> ClosedForm:
    model = _check_same_manifold(specs)
    if len(t) != len(specs):
        raise ValueError("one level per space is required")
    inputs = dict(volume=model.total_volume, d=[sp.d for sp in specs], t=[float(x) for x in t])
    return ClosedForm(intersection_excursion_value(**inputs), "intersection_excursion", inputs)


def expected_leray(spec: EigenspaceSpec, t: float, strict: bool = True) -> ClosedForm:
    inputs = dict(volume=spec.volume, d=spec.d, c=spec.c, t=float(t), strict=strict)
    return ClosedForm(leray_value(**inputs), "leray", inputs)


def expected_integral_functional(
    spec: EigenspaceSpec, f: Callable[[float], float], breakpoints: Sequence[float] = ()
) -> ClosedForm:
    """Mean of ∫_M f(u(p)) dp over the unit sphere; f is a function of the absolute value u(p)."""
    inputs = dict(d=spec.d, c=spec.c, f=f, breakpoints=tuple(breakpoints))
    return ClosedForm(functional_mean_value(**inputs), "integral_functional", inputs)


def moment_formula(a: float, d: int) -> float:
    return moment_value(a, d)


class LpBounds(NamedTuple):
    a: float
    universal: float  # √((a+1)/e); a theorem for a >= 2
    asymptotic: float  # bound on the limsup as dim E -> ∞, valid for a >= 1
    proven: bool


def lp_mean_bound(a: float) -> LpBounds:
    if a < 1:
        raise ValueError("L^a bounds need a >= 1")
    universal = math.sqrt((a + 1) / math.e)
    asymptotic = math.sqrt(2) * math.exp(log_gamma((a + 1) / 2) / a - math.log(math.pi) / (2 * a))
    if not asymptotic < universal:
        raise ArithmeticError(f"asymptotic bound {asymptotic} not below {universal} at a={a}")
    return LpBounds(a, universal, asymptotic, a >= 2)


class SupBound(NamedTuple):
    kappa: float
    log_bound: float  # (e^{m-1/2} + ε) √(ln κ); nan when κ <= 1
    trivial: float  # c = √(dim E), attained at normalized evaluation functionals
    informative: bool
    note: str


def sup_mean_bound(spec: EigenspaceSpec, epsilon: float = 0.1) -> SupBound:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    kappa = spec.kappa
    if kappa <= 1:
        return SupBound(kappa, math.nan, spec.c, False, "uninformative: kappa <= 1")
    log_bound = (math.exp(spec.m - 0.5) + epsilon) * math.sqrt(math.log(kappa))
    informative = log_bound < spec.c
    note = "sharp bound c attained on normalized evaluation functionals"
    if not informative:
        note = "uninformative: log bound exceeds c; " + note
    return SupBound(kappa, log_bound, spec.c, informative, note)


# -- radial laws -------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialDensity:
    """Radial profile α on [0, ∞): the law on E has density α(|x|) / (a_d ϖ_d).

    ``support`` bounds where α may be nonzero; ``scale`` sets the truncation of an
    infinite support (the profile must be negligible beyond a few dozen scales).
    """

    alpha: Callable
    support: tuple[float, float] = (0.0, math.inf)
    scale: float = 1.0
    name: str = "radial"
    knots: tuple[float, ...] = ()  # radii where α is not smooth

    def cuts(self, lo: float, hi: float) -> list[float]:
        """[lo, hi] split at the knots that fall strictly inside."""
        return [lo, *sorted(k for k in self.knots if lo < k < hi), hi]

    @classmethod
    def gaussian(cls, sigma: float) -> "RadialDensity":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(lambda r: np.exp(-(np.asarray(r) / sigma) ** 2), (0.0, math.inf), sigma, f"gaussian({sigma:g})")

    @classmethod
    def bump(cls, center: float, width: float) -> "RadialDensity":
        """Smooth bump supported on [center - width, center + width]."""

        def alpha(r):
            x = (np.asarray(r, dtype=float) - center) / width
            inside = np.abs(x) < 1
            out = np.zeros_like(x)
            out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
            return out if out.ndim else float(out)

        return cls(alpha, (center - width, center + width), width, f"bump({center:g},{width:g})")

    @classmethod
    def indicator(cls, lo: float, hi: float) -> "RadialDensity":
        return cls(lambda r: np.ones_like(np.asarray(r, dtype=float)), (lo, hi), hi - lo, f"indicator[{lo:g},{hi:g}]")

    @classmethod
    def from_table(cls, r, alpha, name: str = "table") -> "RadialDensity":
        r = np.asarray(r, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        if r.ndim != 1 or r.shape != alpha.shape or len(r) < 2 or np.any(np.diff(r) <= 0):
            raise ValueError("radial table needs increasing r with matching alpha values")
        if np.any(alpha < 0) or not np.any(alpha > 0) or r[0] < 0:
            raise ValueError("radial profile must be non-negative, not identically zero, on r >= 0")
        support = (float(r[0]), float(r[-1]))
        return cls(lambda x: np.interp(x, r, alpha, left=0.0, right=0.0), support, support[1] - support[0], name, tuple(r[1:-1].tolist()))

    def cutoff(self, k: float) -> float:
        """Upper integration limit for profiles weighted by r^k."""
        if math.isfinite(self.support[1]):
            return self.support[1]
        return self.scale * (math.sqrt(k / 2 + 1) + 12.0)

    def moment(self, k: float) -> float:
        """a_k = ∫ r^k α(r) dr."""
        lo, hi = self.support[0], self.cutoff(k)
        mode = min(max(self.scale * math.sqrt(max(k, 0) / 2), lo), hi)
        pts = [mode] if lo < mode < hi else None
        cuts = self.cuts(lo, hi)
        if len(cuts) > 2:
            val = _quad_pieces(lambda r: r**k * self.alpha(r), cuts)
        else:
            val = _quad(lambda r: r**k * self.alpha(r), lo, hi, points=pts)
        if not (val > 0 and math.isfinite(val)):
            raise QuadratureError(f"radial moment a_{k} is not finite and positive")
        return val

    def abs_moment_ratio(self, a: float, d: int) -> float:
        """E[|x|^a] for the law on a (d+1)-dimensional space: a_{d+a} / a_d."""
        return self.moment(d + a) / self.moment(d)


class LawExpectations(NamedTuple):
    level_measure: ClosedForm
    excursion_volume: ClosedForm
    leray: ClosedForm


def _radial_inner(density: RadialDensity, d: int, xi: float) -> float:
    """∫_0^∞ τ^{d/2-1} α(√(τ+ξ²)) dτ.

    Evaluated in the radius r = √(τ+ξ²): 2∫_ξ^∞ (r²-ξ²)^{d/2-1} r α(r) dr, with the
    (r-ξ)^{d/2-1} endpoint behaviour carried by an algebraic weight.
    """
    lo, hi = density.support[0], density.cutoff(d)
    beta = d / 2 - 1
    if xi >= hi:
        return 0.0
    if xi <= 0.0:
        val = _quad_pieces(lambda r: r ** (d - 1) * density.alpha(r), density.cuts(lo, hi))
    elif xi >= lo:
        cuts = density.cuts(xi, hi)
        val = _quad(lambda r: (r + xi) ** beta * r * density.alpha(r), cuts[0], cuts[1], weight="alg", wvar=(beta, 0.0))
        val += _quad_pieces(lambda r: (r * r - xi * xi) ** beta * r * density.alpha(r), cuts[1:])
    else:
        val = _quad_pieces(lambda r: (r * r - xi * xi) ** beta * r * density.alpha(r), density.cuts(lo, hi))
    return 2.0 * val


def radial_level_factor(s: float, d: int, t: float, density: RadialDensity) -> float:
    """(s / a_d) ∫_t^∞ (r²-t²)^{(d-1)/2} r α(r) dr: the per-space factor of level-set means."""
    lo, hi = max(t, density.support[0]), density.cutoff(d)
    if lo >= hi:
        return 0.0
    integral = _quad_pieces(lambda r: (r * r - t * t) ** ((d - 1) / 2) * r * density.alpha(r), density.cuts(lo, hi))
    return s * integral / density.moment(d)


def radial_level_value(volume, m, s, d, t, density) -> float:
    return volume * sphere_volume_ratio(m - 1, m) * radial_level_factor(s, d, t, density)


def radial_excursion_value(volume, d, t, density) -> float:
    lo, hi = max(t, 0.0), density.cutoff(d)
    if lo >= hi:
        return 0.0
    # the inner integral is only piecewise smooth in ξ: its kinks sit at the support edge and the knots
    cuts = sorted({lo, hi, *(k for k in (density.support[0], *density.knots) if lo < k < hi)})
    outer = _quad_pieces(lambda xi: _radial_inner(density, d, xi), cuts)
    return volume * sphere_volume_ratio(d - 1, d) * outer / (2.0 * density.moment(d))


def radial_leray_value(volume, d, c, t, density) -> float:
    return volume * sphere_volume_ratio(d - 1, d) * _radial_inner(density, d, t) / (2.0 * c * density.moment(d))


def radial_expectations(spec: EigenspaceSpec, density: RadialDensity, t: float) -> LawExpectations:
    if t < 0:
        raise ValueError("radial formulas take t >= 0 (use u -> -u symmetry for negative levels)")
    base = dict(volume=spec.volume, d=spec.d, t=float(t), density=density)
    lvl = dict(base, m=spec.m, s=spec.s)
    ler = dict(base, c=spec.c)
    return LawExpectations(
        ClosedForm(radial_level_value(**lvl), "radial_level_measure", lvl),
        ClosedForm(radial_excursion_value(**base), "radial_excursion_volume", base),
        ClosedForm(radial_leray_value(**ler), "radial_leray", ler),
    )


def gaussian_level_value(volume, m, s, sigma, t) -> float:
    return volume * sphere_volume_ratio(m - 1, m) * s * math.exp(-((t / sigma) ** 2))


def gaussian_excursion_value(volume, sigma, t) -> float:
    return volume / math.sqrt(math.pi) * erfc_paper(t / sigma)


def gaussian_leray_value(volume, c, sigma, t) -> float:
    return volume / (c * sigma * math.sqrt(math.pi)) * math.exp(-((t / sigma) ** 2))


def gaussian_expectations(spec: EigenspaceSpec, sigma: float, t: float) -> LawExpectations:
    """Means under the law with density ∝ exp(-|x|²/σ²) on E."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lvl = dict(volume=spec.volume, m=spec.m, s=spec.s, sigma=float(sigma), t=float(t))
    exc = dict(volume=spec.volume, sigma=float(sigma), t=float(t))
    ler = dict(volume=spec.volume, c=spec.c, sigma=float(sigma), t=float(t))
    return LawExpectations(
        ClosedForm(gaussian_level_value(**lvl), "gaussian_level_measure", lvl),
        ClosedForm(gaussian_excursion_value(**exc), "gaussian_excursion_volume", exc),
        ClosedForm(gaussian_leray_value(**ler), "gaussian_leray", ler),
    )


def normalized_sigma(spec: EigenspaceSpec) -> float:
    """σ with σc = √2, i.e. E u(p)² = 1 at every point."""
    return math.sqrt(2) / spec.c


def gaussian_moment_value(a: float, c: float, sigma: float) -> float:
    """Mean of ∫_M |u|^a dp under the Gaussian law: u(p) ~ N(0, σ²c²/2)."""
    return (sigma * c) ** a * math.exp(log_gamma((a + 1) / 2)) / math.sqrt(math.pi)


class AsymptoticLimits(NamedTuple):
    level_measure_per_s: float
    excursion_volume: float
    leray: float
    functional: float | None


def asymptotic_limits(t: float, manifold: ManifoldModel, f: Callable[[float], float] | None = None) -> AsymptoticLimits:
    """dim E -> ∞ limits at a fixed *absolute* level t (X = M)."""
    volume, m = manifold.total_volume, manifold.m
    gauss = math.exp(-t * t / 2)
    functional = None
    if f is not None:
        val = _quad(lambda x: f(x) * math.exp(-x * x / 2), -math.inf, math.inf)
        functional = val / math.sqrt(2 * math.pi)
    return AsymptoticLimits(
        sphere_volume_ratio(m - 1, m) * volume * gauss,
        volume / math.sqrt(math.pi) * erfc_paper(t / math.sqrt(2)),
        volume / math.sqrt(2 * math.pi) * gauss,
        functional,
    )


def radial_moment_value(a: float, d: int, density: RadialDensity) -> float:
    """Mean of ∫_M |u|^a dp under a radial law: E|x|^a times the unit-sphere moment."""
    return density.abs_moment_ratio(a, d) * moment_value(a, d)


def radial_excursion_complement_value(volume, d, t, density) -> float:
    """Excursion volume at a negative level t through u -> -u."""
    return volume - radial_excursion_value(volume, d, -t, density)


def lp_bound_value(a: float) -> float:
    return lp_mean_bound(a).universal


def sup_bound_value(m: int, kappa: float, c: float, epsilon: float) -> float:
    """Smaller of c and the logarithmic bound (when κ > 1)."""
    if kappa <= 1:
        return c
    return min(c, (math.exp(m - 0.5) + epsilon) * math.sqrt(math.log(kappa)))


_FORMULAS = {
    "moment": moment_value,
    "gaussian_moment": gaussian_moment_value,
    "radial_moment": radial_moment_value,
    "radial_excursion_complement": radial_excursion_complement_value,
    "lp_bound": lp_bound_value,
    "sup_bound": sup_bound_value,
    "level_measure": level_measure_value,
    "excursion_volume": excursion_volume_value,
    "intersection_measure": intersection_measure_value,
    "intersection_excursion": intersection_excursion_value,
    "leray": leray_value,
    "integral_functional": functional_mean_value,
    "radial_level_measure": radial_level_value,
    "radial_excursion_volume": radial_excursion_value,
    "radial_leray": radial_leray_value,
    "gaussian_level_measure": gaussian_level_value,
    "gaussian_excursion_volume": gaussian_excursion_value,
    "gaussian_leray": gaussian_leray_value,
}
