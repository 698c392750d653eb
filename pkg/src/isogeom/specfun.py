"""Special functions: log-Gamma, sphere areas, spherical cap areas and Gamma ratios.

Everything that involves a ratio of Gamma functions is evaluated in log space so
that dimensions in the thousands do not overflow.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy import special

__all__ = [
    "log_gamma",
    "sphere_volume",
    "log_sphere_volume",
    "sphere_volume_ratio",
    "cap_volume",
    "cap_fraction",
    "erfc_paper",
    "phi_ratio",
    "stirling_defect",
]

# Negative control for the self-test: ISOGEOM_FAULT=gamma perturbs log_gamma.
_FAULT_GAMMA = "gamma" in os.environ.get("ISOGEOM_FAULT", "")


def log_gamma(x):
    """ln Γ(x) for x > 0 (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    out = special.gammaln(arr)
    if _FAULT_GAMMA:
        out = out + 1e-6
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_sphere_volume(k: int) -> float:
    if k < 0:
        raise ValueError("sphere dimension must be non-negative")
    return math.log(2.0) + 0.5 * (k + 1) * math.log(math.pi) - log_gamma(0.5 * (k + 1))


def sphere_volume(k: int) -> float:
    """Hausdorff k-measure of the unit sphere S^k in R^(k+1)."""
    return math.exp(log_sphere_volume(k))


def sphere_volume_ratio(j: int, k: int) -> float:
    """ϖ_j / ϖ_k without forming either factor."""
    return math.exp(log_sphere_volume(j) - log_sphere_volume(k))


def cap_fraction(d: int, t):
    """κ_d(t) / ϖ_d, the fraction of S^d lying in the cap {<x, e> >= t}.

    For t >= 0 the substitution x = τ² turns the cap integral into a regularized
    incomplete Beta function: κ_d(t) = (ϖ_d / 2) I_{1-t²}(d/2, 1/2).
    """
    if d < 1:
        raise ValueError("cap dimension d must be >= 1")
    t = np.asarray(t, dtype=float)
    a = np.clip(np.abs(t), 0.0, 1.0)
    half = 0.5 * special.betainc(0.5 * d, 0.5, 1.0 - a * a)
    out = np.where(t >= 0, half, 1.0 - half)
    out = np.where(t >= 1.0, 0.0, out)
    out = np.where(t <= -1.0, 1.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def cap_volume(d: int, t):
    """κ_d(t) = ϖ_{d-1} ∫_t^1 (1-τ²)^{d/2-1} dτ, clamped to [0, ϖ_d] outside [-1, 1]."""
    return sphere_volume(d) * cap_fraction(d, t)


def erfc_paper(t):
    """∫_t^∞ exp(-τ²) dτ, i.e. the complementary error function without the 2/√π factor."""
    out = 0.5 * math.sqrt(math.pi) * special.erfc(np.asarray(t, dtype=float))
    if np.ndim(out) == 0:
        return float(out)
    return out


def phi_ratio(b: float, t):
    """t^b Γ(t) / Γ(t + b)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t + b <= 0):
        raise ValueError("phi_ratio requires t > 0 and t + b > 0")
    out = np.exp(b * np.log(t) + log_gamma(t) - log_gamma(t + b))
    if np.ndim(out) == 0:
        return float(out)
    return out


def stirling_defect(t):
    """ln((e/t)^(t-1/2) Γ(t)); decreases from ln√π at t = 1/2 to ln√(2π/e)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("stirling_defect requires t > 0")
    out = (t - 0.5) * (1.0 - np.log(t)) + log_gamma(t)
    if np.ndim(out) == 0:
        return float(out)
    return out
