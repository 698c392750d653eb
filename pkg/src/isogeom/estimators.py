"""Measurements on a single sample u: zeros, level lengths, excursion volumes,
Leray measures, L^a and sup norms, and common zeros of pairs.

All levels here are *absolute* (the value of u), unlike the scaled levels of the
closed-form API. Grids are cached per (space, resolution, frame) and shared
read-only between threads.

Two-dimensional level sets are traced by marching squares: on the periodic
product grid for the torus and on a gnomonic cubed sphere (equiangular, with
true 3-space corners) for the sphere. Saddle cells are resolved by the sign of
the bilinear centre value.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .manifold import TWO_PI, EigenspaceSpec, ManifoldId, QuadratureGrid, quadrature_grid, sphere_frame
from .sampling import PolynomialSample

_TIE = 1e-13  # |u - t| below this at a grid node counts as a degenerate grid
_MAX_FRAMES = 6
_GRAD_FLOOR = 1e-10


class Method(str, enum.Enum):
    MARCHING_SQUARES = "marching_squares"
    SIGN_SCAN = "sign_scan"
    QUADRATURE = "quadrature"
    SUBCELL = "subcell"
    EPS_SHELL = "eps_shell"
    COAREA = "coarea"


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    resolution: int
    method: Method
    flags: tuple[str, ...] = ()


class GridDegeneracy(RuntimeError):
    """A grid node or triangle edge sits on the level set; retried on a shifted grid."""


# -- grids ------------------------------------------------------------------------------


def kmax(spec: EigenspaceSpec) -> float:
    return math.sqrt(spec.lambda_max)


def default_resolution(spec: EigenspaceSpec) -> int:
    return max(64, 16 * math.ceil(kmax(spec)))


def check_wavelength(spec: EigenspaceSpec, resolution: int) -> None:
    """Reject grids with fewer than 4 cells per shortest wavelength 2π/√λ_max."""
    cells = resolution / kmax(spec)
    if cells < 4:
        raise ValueError(f"resolution {resolution} gives {cells:.2f} cells per wavelength; need >= 4 (use >= {math.ceil(4 * kmax(spec))})")


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Quadrilateral cells of a 2-manifold with scalar basis values at the nodes.

    ``corners`` holds for every cell the node indices of (v00, v10, v11, v01) in
    counter-clockwise order; ``corner_xyz`` their coordinates, unwrapped on the
    torus (so differences are true displacements) and unit vectors on the sphere.
    """

    spec: EigenspaceSpec
    resolution: int
    frame: int
    nodes: np.ndarray
    basis: np.ndarray  # (dim, n_nodes)
    corners: np.ndarray  # (n_cells, 4) int
    corner_xyz: np.ndarray  # (n_cells, 4, D)
    triangle_area: np.ndarray  # (n_cells, 2): triangles (0,1,2) and (0,2,3)

    @property
    def sphere(self) -> bool:
        return self.spec.manifold.id is ManifoldId.SPHERE2

    def values(self, u: PolynomialSample) -> np.ndarray:
        return u.coeffs @ self.basis


def _rotation(frame: int) -> np.ndarray:
    if frame == 0:
        return np.eye(3)
    axis = np.array([1.0, 2.0, 3.0]) / math.sqrt(14.0)
    angle = 0.1234567 * frame
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


_CUBE_FACES = [
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
]


def spherical_triangle_area(a, b, c) -> np.ndarray:
    """Area of the geodesic triangle with unit-vector vertices (Van Oosterom-Strackee)."""
    num = np.abs(np.einsum("...i,...i->...", a, np.cross(b, c)))
    den = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) + np.einsum("...i,...i->...", c, a)
    return 2.0 * np.arctan2(num, den)


def cubed_sphere(n: int, frame: int = 0):
    """Nodes (6 (n+1)², 3) and cell corner indices of an equiangular cubed sphere."""
    ang = np.tan(np.linspace(-math.pi / 4, math.pi / 4, n + 1))
    A, B = np.meshgrid(ang, ang, indexing="ij")
    rot = _rotation(frame)
    nodes, corners = [], []
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    base = (i * (n + 1) + j).ravel()
    for f, (normal, e1, e2) in enumerate(_CUBE_FACES):
        p = np.asarray(normal, float) + A[..., None] * np.asarray(e1, float) + B[..., None] * np.asarray(e2, float)
        p = (p / np.linalg.norm(p, axis=-1, keepdims=True)).reshape(-1, 3)
        nodes.append(p @ rot.T)
        off = f * (n + 1) ** 2
        corners.append(np.stack([base, base + n + 1, base + n + 2, base + 1], axis=1) + off)
    return np.concatenate(nodes), np.concatenate(corners)


@lru_cache(maxsize=16)
def cell_grid(spec: EigenspaceSpec, resolution: int, frame: int = 0) -> CellGrid:
    """Marching-squares grid: R×R periodic cells on the torus, 6 (R/4)² cells on the sphere."""
    if spec.m != 2:
        raise ValueError("cell grids exist only on 2-manifolds")
    check_wavelength(spec, resolution)
    if spec.manifold.id is ManifoldId.TORUS2:
        R = resolution
        h = TWO_PI / R
        shift = frame * np.array([0.3819660112501051, 0.2360679774997897]) * h
        g = np.arange(R) * h
        X, Y = np.meshgrid(g, g, indexing="ij")
        nodes = np.stack([X.ravel(), Y.ravel()], axis=1) + shift
        i, j = np.meshgrid(np.arange(R), np.arange(R), indexing="ij")
        ip, jp = (i + 1) % R, (j + 1) % R
        corners = np.stack([i * R + j, ip * R + j, ip * R + jp, i * R + jp], axis=-1).reshape(-1, 4)
        origin = np.stack([i * h, j * h], axis=-1).reshape(-1, 1, 2) + shift
        corner_xyz = origin + np.array([[0, 0], [h, 0], [h, h], [0, h]])
        area = np.full((len(corners), 2), 0.5 * h * h)
    else:
        n = max(2, resolution // 4)
        nodes, corners = cubed_sphere(n, frame)
        corner_xyz = nodes[corners]
        v0, v1, v2, v3 = (corner_xyz[:, k] for k in range(4))
        area = np.stack([spherical_triangle_area(v0, v1, v2), spherical_triangle_area(v0, v2, v3)], axis=1)
    basis = spec.evaluate(nodes)
    for arr in (nodes, basis, corners, corner_xyz, area):
        arr.setflags(write=False)
    return CellGrid(spec, resolution, frame, nodes, basis, corners, corner_xyz, area)


@lru_cache(maxsize=16)
def _quadrature(spec: EigenspaceSpec, resolution: int):
    grid = quadrature_grid(spec.manifold, resolution)
    basis = spec.evaluate(grid.points)
    basis.setflags(write=False)
    return grid, basis


def quadrature_values(u: PolynomialSample, resolution: int) -> tuple[QuadratureGrid, np.ndarray]:
    grid, basis = _quadrature(u.spec, resolution)
    return grid, u.coeffs @ basis


# -- circle -------------------------------------------------------------------------------


def _require(u: PolynomialSample, *ids: ManifoldId) -> None:
    if u.spec.manifold.id not in ids:
        raise ValueError(f"estimator needs a {' or '.join(i.value for i in ids)}, got {u.spec.manifold.id.value}")


def _circle_grid_n(u: PolynomialSample, grid_n: int | None) -> int:
    need = 8 * math.ceil(kmax(u.spec))
    if grid_n is None:
        return max(64, need)
    if grid_n < need:
        raise ValueError(f"grid_n={grid_n} is below 8 x max frequency = {need}")
    return grid_n


def _bisect(fn, a: np.ndarray, b: np.ndarray, fa: np.ndarray, xtol: float) -> np.ndarray:
    """Vectorized bisection of brackets [a, b] with sign(fn(a)) = sign(fa) != sign(fn(b))."""
    neg = np.signbit(fa)
    for _ in range(int(math.ceil(math.log2(max(np.max(b - a, initial=0.0), xtol) / xtol))) + 1):
        mid = 0.5 * (a + b)
        left = np.signbit(fn(mid)) == neg
        a = np.where(left, mid, a)
        b = np.where(left, b, mid)
    return 0.5 * (a + b)


def circle_roots(u: PolynomialSample, level: float, grid_n: int | None = None) -> np.ndarray:
    """Sorted solutions of u(θ) = level in [0, 2π), refined to 1e-12.

    Critical points are bracketed by sign changes of u' on the grid and located
    first, so that every bracket of u - level lies on a monotone arc.
    """
    _require(u, ManifoldId.CIRCLE)
    n = _circle_grid_n(u, grid_n)
    for shift in (0.0, 0.5, 0.25, 0.75):
        theta = (np.arange(n + 1) + shift) * (TWO_PI / n)
        vals, grads = u.evaluate_with_gradient(theta)
        vals = vals - level
        if not np.any(np.abs(vals) < _TIE * max(1.0, u.norm)):
            break
    else:
        raise GridDegeneracy("level hits grid nodes for every shift")
    grads = grads[:, 0]
    k = np.nonzero(np.signbit(grads[:-1]) != np.signbit(grads[1:]))[0]
    deriv = lambda x: u.gradient(x)[:, 0]  # noqa: E731
    crit = _bisect(deriv, theta[k], theta[k + 1], grads[k], 1e-13)
    pts = np.concatenate([theta, crit])
    pv = np.concatenate([vals, u.evaluate(crit) - level])
    order = np.argsort(pts)
    pts, pv = pts[order], pv[order]
    k = np.nonzero(np.signbit(pv[:-1]) != np.signbit(pv[1:]))[0]
    roots = _bisect(lambda x: u.evaluate(x) - level, pts[k], pts[k + 1], pv[k], 1e-12)
    return np.sort(np.mod(roots, TWO_PI))


def count_zeros_circle(u: PolynomialSample, t: float, grid_n: int | None = None) -> int:
    """Number of points with u(θ) = t."""
    if abs(t) > u.spec.c * u.norm:
        return 0
    return len(circle_roots(u, t, grid_n))


def _circle_excursion(u: PolynomialSample, t: float, grid_n: int | None) -> float:
    if t > u.spec.c * u.norm:
        return 0.0
    if t < -u.spec.c * u.norm:
        return TWO_PI
    roots = circle_roots(u, t, grid_n)
    if len(roots) == 0:
        return TWO_PI if float(u.evaluate(np.array([0.0]))[0]) >= t else 0.0
    ends = np.append(roots[1:], roots[0] + TWO_PI)
    mids = 0.5 * (roots + ends)
    above = u.evaluate(np.mod(mids, TWO_PI)) >= t
    return float(np.sum((ends - roots)[above]))


# -- marching squares --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelPolyline:
    """Level set as line segments; endpoints embedded in 3-space (torus: (x, y, 0))."""

    segments: np.ndarray  # (k, 2, 3)
    lengths: np.ndarray  # (k,)
    midpoints: np.ndarray  # (k, 2) torus / (k, 3) sphere, on the manifold
    resolution: int
    flags: tuple[str, ...] = field(default=())

    @property
    def total_length(self) -> float:
        return float(np.sum(self.lengths))

    def __len__(self):
        return len(self.lengths)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x0", "y0", "z0", "x1", "y1", "z1"])
            for seg in self.segments:
                writer.writerow([f"{v:.17g}" for v in seg.ravel()])


# edge k joins corners _EDGES[k]
_EDGES = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])


def _edge_crossings(v: np.ndarray, xyz: np.ndarray):
    """Crossing flags (C, 4) and interpolated crossing points (C, 4, D) on cell edges."""
    a, b = _EDGES[:, 0], _EDGES[:, 1]
    va, vb = v[:, a], v[:, b]
    cross = (va >= 0) != (vb >= 0)
    denom = np.where(cross, va - vb, 1.0)
    lam = np.where(cross, va / denom, 0.0)
    pts = xyz[:, a] + lam[..., None] * (xyz[:, b] - xyz[:, a])
    return cross, pts


def _segments_from_cells(v: np.ndarray, xyz: np.ndarray):
    """Segment endpoint pairs (k, 2, D) for the cells of a marching-squares pass."""
    cross, pts = _edge_crossings(v, xyz)
    ncross = cross.sum(axis=1)
    out = []
    two = np.nonzero(ncross == 2)[0]
    if len(two):
        e = np.nonzero(cross[two])[1].reshape(-1, 2)
        out.append(np.stack([pts[two, e[:, 0]], pts[two, e[:, 1]]], axis=1))
    four = np.nonzero(ncross == 4)[0]
    if len(four):
        centre = v[four].mean(axis=1)
        joined = (centre >= 0) == (v[four, 0] >= 0)
        # corners 0 and 2 connected through the centre: cut off corners 1 and 3
        pa = np.where(joined[:, None, None], np.array([[0, 1], [2, 3]]), np.array([[0, 3], [1, 2]]))
        for s in range(2):
            out.append(np.stack([pts[four, pa[:, s, 0]], pts[four, pa[:, s, 1]]], axis=1))
    if not out:
        return np.zeros((0, 2, xyz.shape[-1]))
    return np.concatenate(out)


def _frames(fn):
    """Run fn(frame) on successively shifted grids until no degeneracy is hit."""
    for frame in range(_MAX_FRAMES):
        try:
            return fn(frame)
        except GridDegeneracy:
            continue
    raise GridDegeneracy(f"degenerate on {_MAX_FRAMES} shifted grids")


def nodal_length_2d(u: PolynomialSample, t: float, resolution: int) -> LevelPolyline:
    """Marching-squares polyline of {u = t} on the torus or the sphere."""
    _require(u, ManifoldId.TORUS2, ManifoldId.SPHERE2)
    check_wavelength(u.spec, resolution)

    def run(frame):
        grid = cell_grid(u.spec, resolution, frame)
        vals = grid.values(u) - t
        if np.any(np.abs(vals) < _TIE * max(1.0, u.norm)):
            raise GridDegeneracy
        v = vals[grid.corners]
        signs = v >= 0
        active = np.nonzero(signs.any(axis=1) & ~signs.all(axis=1))[0]
        seg = _segments_from_cells(v[active], grid.corner_xyz[active])
        if grid.sphere:
            seg = seg / np.linalg.norm(seg, axis=-1, keepdims=True)
            chord = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=-1)
            lengths = 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
            mid = seg.sum(axis=1)
            mid = mid / np.linalg.norm(mid, axis=-1, keepdims=True)
            embedded = seg
        else:
            lengths = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=-1)
            mid = np.mod(seg.mean(axis=1), TWO_PI)
            wrapped = np.mod(seg, TWO_PI)
            embedded = np.concatenate([wrapped, np.zeros(wrapped.shape[:2] + (1,))], axis=-1)
        flags = (f"frame={frame}",) if frame else ()
        return LevelPolyline(embedded, lengths, mid, resolution, flags)

    return _frames(run)


def level_measure(u: PolynomialSample, t: float, resolution: int) -> MeasureEstimate:
    """h^{m-1}(L^t_u): point count on the circle, polyline length on 2-manifolds."""
    if u.spec.m == 1:
        return MeasureEstimate(float(count_zeros_circle(u, t, resolution)), resolution, Method.SIGN_SCAN)
    line = nodal_length_2d(u, t, resolution)
    return MeasureEstimate(line.total_length, resolution, Method.MARCHING_SQUARES, line.flags)


# -- excursion volume and Leray measure -----------------------------------------------------


def _triangle_fraction(f: np.ndarray, t: float) -> np.ndarray:
    """Area fraction of {f >= t} for a linear function with vertex values f (..., 3)."""
    f0, f1, f2 = np.moveaxis(np.sort(f, axis=-1), -1, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        low = 1.0 - (t - f0) ** 2 / ((f1 - f0) * (f2 - f0))
        high = (f2 - t) ** 2 / ((f2 - f0) * (f2 - f1))
    out = np.where(t <= f1, low, high)
    out = np.where(t <= f0, 1.0, out)
    return np.where(t >= f2, 0.0, out)


def _subcell_excursions(u: PolynomialSample, levels, resolution: int, frame: int = 0) -> np.ndarray:
    grid = cell_grid(u.spec, resolution, frame)
    v = grid.values(u)[grid.corners]
    lo, hi = v.min(axis=1), v.max(axis=1)
    cell_area = grid.triangle_area.sum(axis=1)
    out = []
    for t in levels:
        full = np.sum(cell_area[lo >= t])
        mixed = np.nonzero((lo < t) & (hi > t))[0]
        vm = v[mixed]
        tri1 = _triangle_fraction(vm[:, [0, 1, 2]], t)
        tri2 = _triangle_fraction(vm[:, [0, 2, 3]], t)
        out.append(full + np.sum(tri1 * grid.triangle_area[mixed, 0] + tri2 * grid.triangle_area[mixed, 1]))
    return np.array(out, dtype=float)


def excursion_volume(u: PolynomialSample, t: float, resolution: int, method: Method | str = Method.QUADRATURE) -> MeasureEstimate:
    """h^m({u >= t}).

    QUADRATURE: ϖ times the weighted fraction of quadrature nodes with u >= t
    (unbiased under the invariant laws). SUBCELL: exact area of the
    piecewise-linear interpolant's excursion on the triangulated cell grid.
    On the circle both are replaced by the exact length between refined roots.
    """
    method = Method(method)
    if u.spec.m == 1:
        return MeasureEstimate(_circle_excursion(u, t, resolution), resolution, Method.SIGN_SCAN)
    if method is Method.SUBCELL:
        return MeasureEstimate(float(_subcell_excursions(u, [t], resolution)[0]), resolution, method)
    if method is not Method.QUADRATURE:
        raise ValueError(f"unsupported excursion method {method}")
    grid, vals = quadrature_values(u, resolution)
    frac = float(np.sum(grid.weights[vals >= t]))
    return MeasureEstimate(u.spec.volume * frac, resolution, method)


def leray_eps_shell(u: PolynomialSample, t: float, epsilon: float, resolution: int) -> MeasureEstimate:
    """(h^m(U^{t-ε}) - h^m(U^{t+ε})) / 2ε, with O(ε²) bias away from critical levels.

    Uses exact excursion lengths on the circle and sub-cell areas on 2-manifolds,
    both continuous in t, so small ε does not just count grid nodes.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if u.spec.m == 1:
        lo, hi = (_circle_excursion(u, x, resolution) for x in (t - epsilon, t + epsilon))
    else:
        lo, hi = _subcell_excursions(u, [t - epsilon, t + epsilon], resolution)
    return MeasureEstimate(max(0.0, float(lo - hi) / (2.0 * epsilon)), resolution, Method.EPS_SHELL)


def leray_coarea(u: PolynomialSample, t: float, resolution: int) -> MeasureEstimate:
    """∫_{L^t} dh^{m-1} / |∇u|: Σ 1/|u'| over roots on the circle, midpoint rule on the polyline otherwise."""
    flags: list[str] = []
    if u.spec.m == 1:
        if abs(t) > u.spec.c * u.norm:
            return MeasureEstimate(0.0, resolution, Method.COAREA)
        roots = circle_roots(u, t, resolution)
        if len(roots) == 0:
            return MeasureEstimate(0.0, resolution, Method.COAREA)
        g = np.abs(u.gradient(roots)[:, 0])
        lengths = np.ones_like(g)
    else:
        line = nodal_length_2d(u, t, resolution)
        flags.extend(line.flags)
        if len(line) == 0:
            return MeasureEstimate(0.0, resolution, Method.COAREA, tuple(flags))
        g = np.linalg.norm(u.gradient(line.midpoints), axis=-1)
        lengths = line.lengths
    if np.any(g < _GRAD_FLOOR):
        flags.append("near-critical")
        g = np.maximum(g, _GRAD_FLOOR)
    return MeasureEstimate(float(np.sum(lengths / g)), resolution, Method.COAREA, tuple(flags))


# -- norms --------------------------------------------------------------------------------


def _antiderivative(y, a):
    """F with F' = |y|^a."""
    return np.sign(y) * np.abs(y) ** (a + 1) / (a + 1)


def integral_abs_power(u: PolynomialSample, a: float, resolution: int) -> float:
    """∫_M |u|^a dp for a > -1 (probability measure).

    For a < 0 the nodes within δ = 2/resolution of the nodal set, judged by the
    first-order distance |u|/|∇u|, are replaced by the average of |u_0 + |∇u| s|^a
    over a cell-wide window, which keeps the integrable singularity under control.
    """
    if a <= -1:
        raise ValueError("exponent must exceed -1")
    grid, vals = quadrature_values(u, resolution)
    absval = np.abs(vals)
    if a >= 0:
        return float(np.sum(grid.weights * absval**a))
    with np.errstate(divide="ignore"):
        contrib = absval**a
    delta = 2.0 / resolution
    # candidates first (cheap bound |∇u| <= κ|coeffs|), then the exact test
    near = np.nonzero(absval < u.lipschitz * delta)[0]
    if len(near):
        g = np.linalg.norm(u.gradient(grid.points[near]).reshape(len(near), -1), axis=-1)
        close = absval[near] < g * delta
        idx, g = near[close], g[close]
        width = (grid.weights[idx] * u.spec.volume) ** (1.0 / u.spec.m)
        y0 = vals[idx]
        half = 0.5 * g * width
        contrib[idx] = (_antiderivative(y0 + half, a) - _antiderivative(y0 - half, a)) / np.maximum(2 * half, 1e-300)
    return float(np.sum(grid.weights * contrib))


def lp_norm(u: PolynomialSample, a: float, resolution: int) -> float:
    if a < 1:
        raise ValueError("L^a norms need a >= 1")
    return integral_abs_power(u, a, resolution) ** (1.0 / a)


class SupEstimate(NamedTuple):
    value: float  # refined maximum of |u|
    grid_max: float
    certified_upper: float  # grid_max + κ|coeffs| · covering radius


def _chart_objective(u: PolynomialSample, p0, sign: float):
    """-sign·u and its gradient in local coordinates x around p0.

    Torus: p0 + x. Sphere: the normalized point p0 + x1 e1 + x2 e2, whose
    differential maps x_i to e_i / |q| on tangent vectors.
    """
    if u.spec.manifold.id is ManifoldId.TORUS2:

        def fun(x):
            val, grad = u.evaluate_with_gradient((np.asarray(p0) + x)[None, :])
            return -sign * float(val[0]), -sign * grad[0]

        return fun
    p0 = np.asarray(p0)
    e1, e2 = np.linalg.svd(p0[None, :])[2][1:]

    def fun(x):
        q = p0 + x[0] * e1 + x[1] * e2
        r = np.linalg.norm(q)
        q = (q / r)[None, :]
        val, grad = u.evaluate_with_gradient(q)
        et, ef = sphere_frame(q)
        g3 = grad[0, 0] * et[0] + grad[0, 1] * ef[0]
        return -sign * float(val[0]), -sign * np.array([g3 @ e1, g3 @ e2]) / r

    return fun


def sup_norm(u: PolynomialSample, resolution: int, refine: int = 3) -> SupEstimate:
    """max |u| over the quadrature grid, polished by local ascent from the best nodes."""
    grid, vals = quadrature_values(u, resolution)
    absval = np.abs(vals)
    grid_max = float(absval.max())
    best = grid_max
    h = grid.covering_radius
    for k in np.argsort(absval)[::-1][:refine]:
        sign = 1.0 if vals[k] >= 0 else -1.0
        if u.spec.m == 1:
            centre = float(grid.points[k])
            res = optimize.minimize_scalar(
                lambda x: -sign * float(u.evaluate(np.array([x]))[0]),
                bounds=(centre - 2 * h, centre + 2 * h),
                method="bounded",
                options={"xatol": 1e-12},
            )
            best = max(best, -float(res.fun))
            continue
        res = optimize.minimize(_chart_objective(u, grid.points[k], sign), np.zeros(2), jac=True, method="BFGS", options={"gtol": 1e-10 * u.lipschitz})
        # a line search can wander off; only trust values the objective actually attained
        best = max(best, -float(res.fun))
    return SupEstimate(best, grid_max, grid_max + u.lipschitz * h)


# -- common zeros -------------------------------------------------------------------------


class CommonZeros(NamedTuple):
    count: int
    points: np.ndarray
    near_tangential: int
    frame: int


def _triangle_solutions(f, g):
    """Barycentric zeros of the linear interpolants of (f, g) with vertex values (T, 3)."""
    f0, g0 = f[:, 0], g[:, 0]
    a11, a12 = f[:, 1] - f0, f[:, 2] - f0
    a21, a22 = g[:, 1] - g0, g[:, 2] - g0
    det = a11 * a22 - a12 * a21
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = (-f0 * a22 + a12 * g0) / det
        beta = (-a11 * g0 + a21 * f0) / det
    gamma = 1.0 - alpha - beta
    bary = np.stack([gamma, alpha, beta], axis=1)
    return bary, det


def common_zero_count(u1: PolynomialSample, u2: PolynomialSample, resolution: int, t1: float = 0.0, t2: float = 0.0) -> CommonZeros:
    """Number of common solutions of u1 = t1, u2 = t2 on a 2-manifold.

    Each grid cell is split into two triangles on which both fields are replaced
    by their linear interpolants; a triangle contributes one point when the
    interpolated 2×2 system has its solution inside. Solutions on a triangle
    boundary (shared with a neighbour) trigger a recount on a shifted grid.
    """
    if u1.spec.m != 2 or u1.spec.manifold != u2.spec.manifold:
        raise ValueError("common zeros need two samples on the same 2-manifold")
    if u1.spec != u2.spec:
        check_wavelength(u2.spec, resolution)

    def run(frame):
        g1 = cell_grid(u1.spec, resolution, frame)
        g2 = g1 if u2.spec == u1.spec else cell_grid(u2.spec, resolution, frame)
        f = (g1.values(u1) - t1)[g1.corners]
        g = (g2.values(u2) - t2)[g2.corners]
        pts, tangential = [], 0
        for tri in ([0, 1, 2], [0, 2, 3]):
            ft, gt = f[:, tri], g[:, tri]
            cand = np.nonzero((ft.min(1) <= 0) & (ft.max(1) >= 0) & (gt.min(1) <= 0) & (gt.max(1) >= 0))[0]
            if not len(cand):
                continue
            bary, det = _triangle_solutions(ft[cand], gt[cand])
            scale = np.abs(ft[cand]).max(1) * np.abs(gt[cand]).max(1)
            inside = np.all(bary >= 0, axis=1) & (np.abs(det) > 1e-14 * scale)
            if np.any(inside & (np.abs(bary).min(1) < 1e-10)) or np.any(np.abs(det) <= 1e-14 * scale):
                raise GridDegeneracy
            idx = cand[inside]
            xyz = g1.corner_xyz[idx][:, tri]
            p = np.einsum("tk,tkd->td", bary[inside], xyz)
            # sine of the angle between the interpolated gradients (barycentric chart)
            grad_f = np.linalg.norm(ft[idx][:, 1:] - ft[idx][:, :1], axis=1)
            grad_g = np.linalg.norm(gt[idx][:, 1:] - gt[idx][:, :1], axis=1)
            sin_angle = np.abs(det[inside]) / np.maximum(grad_f * grad_g, 1e-300)
            tangential += int(np.sum(sin_angle < 1e-3))
            pts.append(p)
        points = np.concatenate(pts) if pts else np.zeros((0, g1.corner_xyz.shape[-1]))
        if g1.sphere:
            points = points / np.linalg.norm(points, axis=-1, keepdims=True)
        else:
            points = np.mod(points, TWO_PI)
        return CommonZeros(len(points), points, tangential, frame)

    return _frames(run)


# -- checks ---------------------------------------------------------------------------------


def lipschitz_ratio(u: PolynomialSample, p, q) -> np.ndarray:
    """|u(p) - u(q)| / dist(p, q) for matching rows of two point arrays."""
    dist = u.spec.manifold.distance(p, q)
    return np.abs(u.evaluate(p) - u.evaluate(q)) / dist


def inkkr_rhs(u: PolynomialSample, a: float, norm_a: float) -> float:
    """b^{-1/a} r^{-m/a} ‖u‖_a + κ|coeffs| r with r = min(r0/2, 1/κ)."""
    model = u.spec.manifold
    kappa = u.spec.kappa
    r = min(model.ball_r0 / 2.0, 1.0 / kappa)
    return model.ball_b ** (-1.0 / a) * r ** (-model.m / a) * norm_a + kappa * u.norm * r


def inkkr_bound(u: PolynomialSample, a: float, resolution: int) -> tuple[float, float]:
    """(‖u‖_∞, right-hand side of the sup-by-L^a inequality)."""
    norm_a = integral_abs_power(u, a, resolution) ** (1.0 / a)
    return sup_norm(u, resolution).value, inkkr_rhs(u, a, norm_a)
