"""Concrete homogeneous models (circle, flat 2-torus, round 2-sphere) and their eigenspaces.

Functions in an eigenspace are expanded in a basis that is orthonormal for the
*probability* measure on M, so every unit-norm coefficient vector gives a function
with ∫ u² dp = 1.

Point conventions:
    circle  -- array of angles, shape (n,)
    torus   -- array of (x, y) in [0, 2π)², shape (n, 2)
    sphere  -- array of unit vectors, shape (n, 3)

Gradients are returned as components in an orthonormal frame of the tangent
plane: d/dθ on the circle, (∂x, ∂y) on the torus and (e_θ, e_φ) on the sphere.
"""

from __future__ import annotations

import enum
import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class ManifoldId(str, enum.Enum):
    CIRCLE = "circle"
    TORUS2 = "torus"
    SPHERE2 = "sphere"


@dataclass(frozen=True)
class ManifoldModel:
    id: ManifoldId
    m: int
    total_volume: float
    # h^m(B(p, r)) > b * total_volume * r^m for 0 < r < r0
    ball_b: float
    ball_r0: float

    def ball_volume(self, r):
        """Riemannian volume of a geodesic ball of radius r (r below the injectivity radius)."""
        r = np.asarray(r, dtype=float)
        if self.id is ManifoldId.CIRCLE:
            return 2.0 * np.minimum(r, math.pi)
        if self.id is ManifoldId.TORUS2:
            if np.any(r > math.pi):
                raise ValueError("torus balls are Euclidean discs only for r <= π")
            return math.pi * r * r
        return TWO_PI * (1.0 - np.cos(np.minimum(r, math.pi)))

    def distance(self, p, q):
        """Geodesic distance between matching rows of two point arrays."""
        if self.id is ManifoldId.CIRCLE:
            delta = np.abs(np.asarray(p) - np.asarray(q)) % TWO_PI
            return np.minimum(delta, TWO_PI - delta)
        if self.id is ManifoldId.TORUS2:
            delta = np.abs(np.asarray(p) - np.asarray(q)) % TWO_PI
            delta = np.minimum(delta, TWO_PI - delta)
            return np.hypot(delta[..., 0], delta[..., 1])
        return sphere_angle(p, q)

    def random_points(self, rng: np.random.Generator, n: int):
        if self.id is ManifoldId.CIRCLE:
            return rng.uniform(0.0, TWO_PI, n)
        if self.id is ManifoldId.TORUS2:
            return rng.uniform(0.0, TWO_PI, (n, 2))
        g = rng.standard_normal((n, 3))
        return g / np.linalg.norm(g, axis=1, keepdims=True)


CIRCLE = ManifoldModel(ManifoldId.CIRCLE, 1, TWO_PI, ball_b=0.31, ball_r0=1.0)
TORUS2 = ManifoldModel(ManifoldId.TORUS2, 2, TWO_PI**2, ball_b=0.079, ball_r0=3.0)
SPHERE2 = ManifoldModel(ManifoldId.SPHERE2, 2, 4.0 * math.pi, ball_b=0.12, ball_r0=1.5)

MODELS = {model.id: model for model in (CIRCLE, TORUS2, SPHERE2)}


def sphere_angle(p, q):
    """Great-circle distance between unit vectors (atan2 form, accurate for tiny angles)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    cross = np.linalg.norm(np.cross(p, q), axis=-1)
    dot = np.sum(p * q, axis=-1)
    return np.arctan2(cross, dot)


# -- eigenspaces ---------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """An irreducible block of the eigenspace: eigenvalue of -Δ, dimension, basis family.

    ``tag`` identifies the concrete basis: ("trig", k) on the circle,
    ("torus", (k1, k2), ...) for a BC₂ orbit with one representative per ±k pair,
    ("harmonic", n) for spherical harmonics of degree n.
    """

    lam: float
    dim: int
    tag: tuple


@dataclass(frozen=True)
class EigenspaceSpec:
    manifold: ManifoldModel
    blocks: tuple[Block, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("eigenspace needs at least one block")
        if self.dim < 2:
            raise ValueError("eigenspace must have dimension > 1")
        if any(b.lam <= 0 for b in self.blocks):
            raise ValueError("eigenvalues must be positive (space orthogonal to constants)")

    @property
    def m(self) -> int:
        return self.manifold.m

    @property
    def volume(self) -> float:
        return self.manifold.total_volume

    @cached_property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def d(self) -> int:
        return self.dim - 1

    @cached_property
    def c(self) -> float:
        return math.sqrt(self.dim)

    @cached_property
    def alphas(self) -> tuple[float, ...]:
        return tuple(b.dim / self.dim for b in self.blocks)

    @cached_property
    def trace_laplacian(self) -> float:
        """|Tr Δ| on the space."""
        return float(sum(b.lam * b.dim for b in self.blocks))

    @cached_property
    def s(self) -> float:
        """Homothety coefficient of the coherent-state immersion M -> S."""
        return math.sqrt(self.trace_laplacian / (self.m * self.dim))

    @property
    def kappa(self) -> float:
        """Sharp Lipschitz constant of unit-norm elements."""
        return self.c * self.s

    @cached_property
    def lambda_max(self) -> float:
        return max(b.lam for b in self.blocks)

    @cached_property
    def block_slices(self) -> tuple[slice, ...]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return tuple(out)

    def describe(self) -> str:
        return self.label or f"{self.manifold.id.value}:{[b.tag for b in self.blocks]}"

    # basis evaluation -------------------------------------------------------------

    def evaluate(self, points) -> np.ndarray:
        """Basis values, shape (dim, n)."""
        return _EVALUATORS[self.manifold.id](self, np.asarray(points, dtype=float), False)[0]

    def evaluate_with_gradient(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Basis values (dim, n) and gradients (dim, n, m) in the orthonormal frame."""
        return _EVALUATORS[self.manifold.id](self, np.asarray(points, dtype=float), True)

    def gradient(self, points) -> np.ndarray:
        return self.evaluate_with_gradient(points)[1]

    def basis(self, index: int) -> "BasisFunction":
        if not 0 <= index < self.dim:
            raise IndexError(index)
        return BasisFunction(
            index,
            lambda p: self.evaluate(np.atleast_1d(p) if self.m == 1 else np.atleast_2d(p))[index],
            lambda p: self.gradient(np.atleast_1d(p) if self.m == 1 else np.atleast_2d(p))[index],
        )


class BasisFunction(NamedTuple):
    index: int
    evaluate: Callable
    gradient: Callable


def _circle_eval(spec: EigenspaceSpec, theta: np.ndarray, with_grad: bool):
    theta = theta.reshape(-1)
    ks = np.array([b.tag[1] for b in spec.blocks], dtype=float)
    arg = np.multiply.outer(ks, theta)
    ck, sk = math.sqrt(2) * np.cos(arg), math.sqrt(2) * np.sin(arg)
    # rows interleave (cos kθ, sin kθ) block by block
    values = np.stack([ck, sk], axis=1).reshape(-1, theta.size)
    if not with_grad:
        return values, None
    grads = np.stack([-ks[:, None] * sk, ks[:, None] * ck], axis=1).reshape(-1, theta.size)
    return values, grads[:, :, None]


def _torus_eval(spec: EigenspaceSpec, xy: np.ndarray, with_grad: bool):
    xy = xy.reshape(-1, 2)
    rows, grads = [], []
    for b in spec.blocks:
        for k in b.tag[1:]:
            phase = k[0] * xy[:, 0] + k[1] * xy[:, 1]
            cp, sp = np.cos(phase), np.sin(phase)
            rows += [math.sqrt(2) * cp, math.sqrt(2) * sp]
            if with_grad:
                kv = np.array(k, dtype=float)
                grads += [-math.sqrt(2) * sp[:, None] * kv, math.sqrt(2) * cp[:, None] * kv]
    values = np.array(rows)
    if not with_grad:
        return values, None
    return values, np.array(grads)


def normalized_legendre(nmax: int, cos_t: np.ndarray, sin_t: np.ndarray) -> np.ndarray:
    """P̄_n^m(cos θ) for 0 <= m <= n <= nmax, shape (nmax+1, nmax+1, npts).

    Normalized so that ½∫_{-1}^{1} P̄_n^m(x)² dx = 1 (no Condon-Shortley phase).
    Standard three-term recurrence in n at fixed m, seeded by the sectoral terms.
    """
    npts = cos_t.shape[0]
    P = np.zeros((nmax + 1, nmax + 1, npts))
    P[0, 0] = 1.0
    for m in range(1, nmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * sin_t * P[m - 1, m - 1]
    for m in range(0, nmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * cos_t * P[m, m]
        for n in range(m + 2, nmax + 1):
            a = math.sqrt((2 * n - 1) * (2 * n + 1) / ((n - m) * (n + m)))
            b = math.sqrt((2 * n + 1) * (n + m - 1) * (n - m - 1) / ((2 * n - 3) * (n - m) * (n + m)))
            P[n, m] = a * cos_t * P[n - 1, m] - b * P[n - 2, m]
    # P[n, m] is stored with degree first
    return P


def _sphere_eval(spec: EigenspaceSpec, xyz: np.ndarray, with_grad: bool):
    xyz = xyz.reshape(-1, 3)
    z = np.clip(xyz[:, 2], -1.0, 1.0)
    rho = np.hypot(xyz[:, 0], xyz[:, 1])
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    nmax = max(b.tag[1] for b in spec.blocks)
    P = normalized_legendre(nmax + 1 if with_grad else nmax, z, rho)
    r2 = math.sqrt(2)
    rows, g_theta, g_phi = [], [], []
    for b in spec.blocks:
        n = b.tag[1]
        rows.append(P[n, 0])
        if with_grad:
            g_theta.append(-math.sqrt(n * (n + 1)) * P[n, 1])
            g_phi.append(np.zeros_like(z))
        for m in range(1, n + 1):
            cm, sm = np.cos(m * phi), np.sin(m * phi)
            rows += [r2 * P[n, m] * cm, r2 * P[n, m] * sm]
            if with_grad:
                lower = math.sqrt((n + m) * (n - m + 1)) * P[n, m - 1]
                upper = math.sqrt((n - m) * (n + m + 1)) * P[n, m + 1] if m < n else 0.0
                dtheta = 0.5 * (lower - upper)
                # m P̄_n^m / sin θ, written without the division so poles are harmless
                m_over_sin = 0.5 * math.sqrt((2 * n + 1) / (2 * n + 3)) * (
                    math.sqrt((n + m + 1) * (n + m + 2)) * P[n + 1, m + 1]
                    + math.sqrt((n - m + 1) * (n - m + 2)) * P[n + 1, m - 1]
                )
                g_theta += [r2 * dtheta * cm, r2 * dtheta * sm]
                g_phi += [-r2 * m_over_sin * sm, r2 * m_over_sin * cm]
    values = np.array(rows)
    if not with_grad:
        return values, None
    return values, np.stack([np.array(g_theta), np.array(g_phi)], axis=-1)


_EVALUATORS = {
    ManifoldId.CIRCLE: _circle_eval,
    ManifoldId.TORUS2: _torus_eval,
    ManifoldId.SPHERE2: _sphere_eval,
}


def sphere_frame(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent frame (e_θ, e_φ) matching the gradient components."""
    xyz = np.atleast_2d(xyz)
    theta = np.arccos(np.clip(xyz[:, 2], -1.0, 1.0))
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    e_theta = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=1)
    e_phi = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=1)
    return e_theta, e_phi


def sphere_point(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


# -- constructors --------------------------------------------------------------------


def make_circle_space(spectrum) -> EigenspaceSpec:
    """Trigonometric polynomials with frequencies in ``spectrum``."""
    ks = sorted({int(k) for k in spectrum})
    if not ks:
        raise ValueError("empty spectrum")
    if ks[0] < 1:
        raise ValueError("circle frequencies must be >= 1")
    blocks = tuple(Block(float(k * k), 2, ("trig", k)) for k in ks)
    return EigenspaceSpec(CIRCLE, blocks, label=f"circle K={_compact(ks)}")


def bc2_orbit(k) -> tuple[tuple[int, int], ...]:
    """Representatives of the BC₂ orbit of k, one per ±pair (first nonzero entry positive)."""
    k1, k2 = int(k[0]), int(k[1])
    orbit = set()
    for a, b in ((k1, k2), (k2, k1)):
        for sa, sb in itertools.product((1, -1), repeat=2):
            v = (sa * a, sb * b)
            if v[0] < 0 or (v[0] == 0 and v[1] < 0):
                v = (-v[0], -v[1])
            orbit.add(v)
    return tuple(sorted(orbit, reverse=True))


def make_torus_space(generators) -> EigenspaceSpec:
    """Span of √2 cos(k·x), √2 sin(k·x) over the BC₂-closure of the generators."""
    gens = [tuple(int(v) for v in g) for g in generators]
    if not gens:
        raise ValueError("empty spectrum")
    blocks, seen = [], set()
    for g in gens:
        if len(g) != 2:
            raise ValueError(f"torus frequency must be an integer pair, got {g}")
        if g == (0, 0):
            raise ValueError("zero frequency is not allowed (constants)")
        reps = bc2_orbit(g)
        if reps in seen:
            continue
        seen.add(reps)
        blocks.append(Block(float(g[0] ** 2 + g[1] ** 2), 2 * len(reps), ("torus",) + reps))
    return EigenspaceSpec(TORUS2, tuple(blocks), label=f"torus orbits={gens}")


def make_sphere_space(degrees) -> EigenspaceSpec:
    """Real spherical harmonics of the given degrees."""
    ns = sorted({int(n) for n in degrees})
    if not ns:
        raise ValueError("empty spectrum")
    if ns[0] < 1:
        raise ValueError("degree 0 (constants) is not allowed")
    blocks = tuple(Block(float(n * (n + 1)), 2 * n + 1, ("harmonic", n)) for n in ns)
    return EigenspaceSpec(SPHERE2, blocks, label=f"sphere degrees={_compact(ns)}")


def _compact(ks) -> str:
    if len(ks) > 2 and ks == list(range(ks[0], ks[-1] + 1)):
        return f"{{{ks[0]}..{ks[-1]}}}"
    return "{" + ",".join(map(str, ks)) + "}"


def parse_spectrum(manifold: str, text: str) -> EigenspaceSpec:
    """Parse a spectrum string: "1..5" or "1,2,7" (circle, sphere), "(1,0),(1,1)" (torus)."""
    manifold = manifold.strip().lower()
    text = text.strip()
    if manifold in ("torus", "torus2", "t2"):
        pairs = re.findall(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)", text)
        if not pairs or re.sub(r"\(\s*-?\d+\s*,\s*-?\d+\s*\)|[\s,]", "", text):
            raise ValueError(f"bad torus spectrum {text!r}; expected e.g. (1,0),(1,1)")
        return make_torus_space([(int(a), int(b)) for a, b in pairs])
    values: list[int] = []
    for part in re.split(r"[,\s]+", text):
        if not part:
            continue
        rng = re.fullmatch(r"(\d+)\.\.(\d+)", part)
        if rng:
            values.extend(range(int(rng.group(1)), int(rng.group(2)) + 1))
        elif re.fullmatch(r"-?\d+", part):
            values.append(int(part))
        else:
            raise ValueError(f"bad spectrum entry {part!r}")
    if manifold in ("circle", "t1", "s1"):
        return make_circle_space(values)
    if manifold in ("sphere", "sphere2", "s2"):
        return make_sphere_space(values)
    raise ValueError(f"unknown manifold {manifold!r}")


# -- quadrature ----------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray
    weights: np.ndarray  # sum to 1
    covering_radius: float  # every point of M is within this distance of a node
    shape: tuple[int, ...]

    def __iter__(self):
        return iter(zip(self.points, self.weights))

    def __len__(self):
        return len(self.weights)


def quadrature_grid(model: ManifoldModel, resolution: int) -> QuadratureGrid:
    """Probability-measure quadrature on M.

    Circle and torus: uniform (product) grid, exact for trigonometric polynomials
    of degree < resolution. Sphere: Gauss-Legendre in cos θ (resolution // 2 nodes)
    times ``resolution`` equispaced longitudes.
    """
    if resolution < 8:
        raise ValueError("quadrature resolution must be >= 8")
    h = TWO_PI / resolution
    if model.id is ManifoldId.CIRCLE:
        pts = np.arange(resolution) * h
        return QuadratureGrid(pts, np.full(resolution, 1.0 / resolution), h / 2, (resolution,))
    if model.id is ManifoldId.TORUS2:
        g = np.arange(resolution) * h
        X, Y = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        w = np.full(resolution * resolution, 1.0 / resolution**2)
        return QuadratureGrid(pts, w, h / math.sqrt(2), (resolution, resolution))
    n_theta = resolution // 2
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)[::-1]
    wx = wx[::-1]
    phi = np.arange(resolution) * h
    T, F = np.meshgrid(theta, phi, indexing="ij")
    pts = sphere_point(T.ravel(), F.ravel())
    w = (np.repeat(wx, resolution) / (2.0 * resolution))
    # path bound: along a meridian to the nearest ring, then along that parallel
    cover = float(max(theta[0], math.pi - theta[-1], np.max(np.diff(theta)) / 2) + h / 2)
    return QuadratureGrid(pts, w, cover, (n_theta, resolution))


def kernel_diagonal_check(spec: EigenspaceSpec, points) -> float:
    """max over points of |Σ_i e_i(p)² - dim E|."""
    values = spec.evaluate(points)
    return float(np.max(np.abs(np.sum(values * values, axis=0) - spec.dim)))
