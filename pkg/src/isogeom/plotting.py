"""PNG figures for the CLI reports (Agg backend, no display needed)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import closedform as cf  # noqa: E402
from . import estimators as es  # noqa: E402

_STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def simulation_figure(result, path) -> Path:
    """Per-row histograms of the trial values, with the sample mean and the closed form."""
    reports = result.reports
    n = len(reports)
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, n, figsize=(3.6 * n, 3.2), squeeze=False, layout="constrained")
        for j, (ax, rep) in enumerate(zip(axes[0], reports)):
            vals = result.values[:, j]
            vals = vals[np.isfinite(vals)]
            discrete = len(vals) and np.all(vals == np.round(vals)) and np.ptp(vals) < 200
            bins = np.arange(vals.min() - 0.5, vals.max() + 1.5) if discrete else 40
            ax.hist(vals, bins=bins, color="0.75", edgecolor="0.5", linewidth=0.4)
            ax.axvline(rep.mean, color="C0", lw=1.5, label=f"mean {rep.mean:.4g}")
            ref = rep.closed_form.value
            if math.isfinite(ref):
                label = "bound" if rep.comparison == "bound" else "closed form"
                ax.axvline(ref, color="C3", ls="--", lw=1.2, label=f"{label} {ref:.4g}")
            if rep.stderr > 0:
                ax.axvspan(rep.mean - 3 * rep.stderr, rep.mean + 3 * rep.stderr, color="C0", alpha=0.15, lw=0)
            title = rep.quantity if rep.t_scaled is None else f"{rep.quantity}, t = {rep.t_scaled:g}"
            ax.set_title(f"{title}\nN = {rep.n}, z = {rep.z:.2f} ({rep.verdict})")
            ax.legend(frameon=False, fontsize=7)
        fig.suptitle(f"{result.config.spec.describe()}  [{result.config.config_hash}]", fontsize=9)
        return _save(fig, path)


def level_set_figure(cfg, sample, path) -> Path:
    """The level set of one sample at the first configured level."""
    spec = cfg.spec
    level = spec.c * (cfg.levels[0] if cfg.levels else 0.0)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.6, 3.6) if spec.m == 2 else (6.0, 2.8))
        if spec.m == 1:
            theta = np.linspace(0, 2 * np.pi, 2000)
            ax.plot(theta, sample.evaluate(theta), color="k", lw=1)
            ax.axhline(level, color="C3", ls="--", lw=1)
            roots = es.circle_roots(sample, level, cfg.resolution)
            ax.plot(roots, np.full(len(roots), level), "o", color="C3", ms=4)
            ax.set_xlabel("θ")
            ax.set_ylabel("u(θ)")
            ax.set_title(f"{len(roots)} solutions of u = {level:.3g}")
        else:
            line = es.nodal_length_2d(sample, level, cfg.resolution)
            seg = line.segments
            if spec.manifold.id.value == "sphere":
                # longitude/latitude view; segments crossing the date line are dropped
                lon = np.arctan2(seg[..., 1], seg[..., 0])
                lat = np.arcsin(np.clip(seg[..., 2], -1, 1))
                keep = np.abs(lon[:, 0] - lon[:, 1]) < np.pi
                xy = np.stack([lon, lat], axis=-1)[keep]
                ax.set_xlim(-np.pi, np.pi)
                ax.set_ylim(-np.pi / 2, np.pi / 2)
                ax.set_xlabel("longitude")
                ax.set_ylabel("latitude")
            else:
                xy = np.mod(seg[..., :2], 2 * np.pi)
                keep = np.all(np.abs(xy[:, 0] - xy[:, 1]) < np.pi, axis=-1)
                xy = xy[keep]
                ax.set_xlim(0, 2 * np.pi)
                ax.set_ylim(0, 2 * np.pi)
                ax.set_xlabel("x")
                ax.set_ylabel("y")
            ax.set_aspect("equal")
            from matplotlib.collections import LineCollection

            ax.add_collection(LineCollection(xy, colors="k", linewidths=0.8))
            ax.set_title(f"u = {level:.3g}: length {line.total_length:.4g}")
        return _save(fig, path)


def expectation_figure(cfg, path) -> Path:
    """Closed-form level measure, excursion volume and Leray measure against t, with d -> ∞ limits."""
    spec = cfg.spec
    ts = np.linspace(-0.999, 0.999, 401)
    panels = [
        ("level measure", lambda t: cf.expected_level_measure(spec, t).value, lambda t: cf.asymptotic_limits(spec.c * t, spec.manifold).level_measure_per_s * spec.s),
        ("excursion volume", lambda t: cf.expected_excursion_volume(spec, t).value, lambda t: cf.asymptotic_limits(spec.c * t, spec.manifold).excursion_volume),
        ("Leray measure", lambda t: cf.expected_leray(spec, t, strict=False).value, lambda t: cf.asymptotic_limits(spec.c * t, spec.manifold).leray),
    ]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2), layout="constrained")
        for ax, (name, exact, limit) in zip(axes, panels):
            ax.plot(ts, [exact(t) for t in ts], color="k", lw=1.2, label=f"dim E = {spec.dim}")
            ax.plot(ts, [limit(t) for t in ts], color="C0", ls="--", lw=1, label="dim E → ∞ (same c·t)")
            for t in cfg.levels:
                if abs(t) <= 1:
                    ax.plot([t], [exact(t)], "o", color="C3", ms=4)
            ax.set_xlabel("scaled level t")
            ax.set_title(name)
        axes[0].legend(frameon=False, fontsize=7)
        fig.suptitle(spec.describe(), fontsize=9)
        return _save(fig, path)


def bounds_figure(result, path) -> Path:
    """Empirical and exact mean L^a norms against the universal and asymptotic bounds."""
    rows = result.rows
    emp = [r for r in rows if r["check"] == "empirical_lp"]
    jen = {r["a"]: r["value"] for r in rows if r["check"] == "jensen_lp"}
    asy = {r["a"]: r["value"] for r in rows if r["check"] == "asymptotic_lp"}
    a = np.array([r["a"] for r in emp])
    grid = np.linspace(1, max(a.max(), 8) * 1.05, 200)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.plot(grid, np.sqrt((grid + 1) / np.e), color="C3", lw=1.2, label="√((a+1)/e)")
        ax.plot(a, [asy[x] for x in a], "s", mfc="none", color="C0", label="asymptotic bound")
        ax.plot(a, [jen[x] for x in a], "^", color="0.4", label="E(a,d)^(1/a)")
        ax.errorbar(a, [r["value"] for r in emp], yerr=[3 * r["stderr"] for r in emp], fmt="o", color="k", ms=4, capsize=2, label="empirical mean ‖u‖_a")
        ax.set_xlabel("a")
        ax.set_ylabel("mean L^a norm")
        ax.legend(frameon=False, fontsize=7)
        ax.set_title(result.config.spec.describe(), fontsize=9)
        return _save(fig, path)
