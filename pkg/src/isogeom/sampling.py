"""Random polynomials: uniform on the unit sphere of E, Gaussian on E, and radial laws.

Randomness comes from a counter-based generator (Philox) keyed by
(master_seed, trial_index); the draw index within a trial selects an
independent block of the counter space. A trial's stream therefore does not
depend on which worker thread runs it or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .closedform import QuadratureError, RadialDensity
from .manifold import EigenspaceSpec

_MASK64 = (1 << 64) - 1
_CDF_TOL = 1e-6


@dataclass(frozen=True)
class SeedPolicy:
    master_seed: int
    trial_index: int

    def generator(self, draw_index: int = 0) -> np.random.Generator:
        if self.trial_index < 0 or draw_index < 0:
            raise ValueError("trial and draw indices must be non-negative")
        key = [self.master_seed & _MASK64, self.trial_index & _MASK64]
        # the top counter word separates draws; 2^192 values per draw is plenty
        bits = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=[0, 0, 0, draw_index])
        return np.random.Generator(bits)


@dataclass(frozen=True, eq=False)
class PolynomialSample:
    spec: EigenspaceSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.spec.dim,):
            raise ValueError(f"expected {self.spec.dim} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @property
    def lipschitz(self) -> float:
        """κ·|coeffs|, the Lipschitz constant of u for the geodesic distance."""
        return self.spec.kappa * self.norm

    def evaluate(self, points) -> np.ndarray:
        return self.coeffs @ self.spec.evaluate(points)

    def gradient(self, points) -> np.ndarray:
        return np.tensordot(self.coeffs, self.spec.gradient(points), axes=1)

    def evaluate_with_gradient(self, points):
        values, grads = self.spec.evaluate_with_gradient(points)
        return self.coeffs @ values, np.tensordot(self.coeffs, grads, axes=1)

    def scaled(self, r: float) -> "PolynomialSample":
        return PolynomialSample(self.spec, r * self.coeffs)


def _direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        g = rng.standard_normal(dim)
        norm = np.linalg.norm(g)
        if norm > 1e-300:
            return g / norm


def sample_uniform_sphere(spec: EigenspaceSpec, seed: SeedPolicy, draw_index: int = 0) -> PolynomialSample:
    return PolynomialSample(spec, _direction(seed.generator(draw_index), spec.dim))


def sample_gaussian(spec: EigenspaceSpec, sigma: float, seed: SeedPolicy, draw_index: int = 0) -> PolynomialSample:
    """Density ∝ exp(-|x|²/σ²): independent coordinates with variance σ²/2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    g = seed.generator(draw_index).standard_normal(spec.dim)
    return PolynomialSample(spec, (sigma / math.sqrt(2.0)) * g)


class RadiusTable:
    """Inverse CDF of the radius law r^d α(r) / a_d, tabulated once per (density, d)."""

    def __init__(self, density: RadialDensity, d: int, n: int = 4096):
        lo, hi = density.support[0], density.cutoff(d)
        cuts = density.cuts(lo, hi)
        # equal-width panels inside each smooth piece, 8-point Gauss-Legendre on each panel
        per_piece = max(8, n // (len(cuts) - 1))
        edges = np.unique(np.concatenate([np.linspace(a, b, per_piece + 1) for a, b in zip(cuts[:-1], cuts[1:])]))
        x, w = np.polynomial.legendre.leggauss(8)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        nodes = mid[:, None] + half[:, None] * x
        mass = half * ((nodes**d * density.alpha(nodes)) @ w)
        cdf = np.concatenate([[0.0], np.cumsum(mass)])
        total = cdf[-1]
        if not (total > 0 and math.isfinite(total)):
            raise QuadratureError(f"radius law of {density.name} is not normalizable in dimension {d + 1}")
        if not math.isfinite(density.support[1]):
            # mass beyond the truncation radius, estimated by the local power law r^{d+1} α(r)
            tail = hi ** (d + 1) * float(density.alpha(hi))
            if tail > _CDF_TOL * total:
                raise QuadratureError(f"radius law of {density.name} has a heavy tail beyond r = {hi:g}")
        a_d = density.moment(d)
        if abs(total / a_d - 1) > _CDF_TOL:
            raise QuadratureError(f"radius CDF table misses the normalization by {abs(total / a_d - 1):.2e} (heavy tail?)")
        cdf /= total
        # drop (nearly) flat stretches so that the inverse is a tame function
        keep = np.concatenate([[True], np.diff(cdf) > 1e-13])
        self.density, self.d = density, d
        self.cdf, self.radii = cdf[keep], edges[keep]
        self._inverse = PchipInterpolator(self.cdf, self.radii)

    def quantile(self, q):
        return self._inverse(np.clip(q, 0.0, 1.0))


@lru_cache(maxsize=32)
def radius_table(density: RadialDensity, d: int) -> RadiusTable:
    return RadiusTable(density, d)


def sample_radial(spec: EigenspaceSpec, density: RadialDensity, seed: SeedPolicy, draw_index: int = 0) -> PolynomialSample:
    """Direction uniform on the sphere, radius by inverse CDF of r^d α(r)."""
    table = radius_table(density, spec.d)
    rng = seed.generator(draw_index)
    direction = _direction(rng, spec.dim)
    radius = float(table.quantile(rng.uniform()))
    return PolynomialSample(spec, radius * direction)
