"""Experiment configs, seeded parallel Monte Carlo runs and comparison reports.

A config is a flat ``key = value`` text file. Levels are always given scaled
(t with absolute level c·t), and so is ``epsilon`` for the shell estimator.

    manifold     = torus
    spectrum     = (1,0)
    distribution = uniform_sphere      # gaussian(0.5) | gaussian_normalized | radial(profile.csv)
    quantity     = level_measure       # zeros excursion leray_shell leray_coarea lp(4) int_abs_pow(1) sup common_zeros
    levels       = 0, 0.5
    samples      = 10000
    resolution   = 256
    master_seed  = 12345
    epsilon      = 0.01
    output       = out/torus-length
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import closedform as cf
from . import estimators as es
from . import sampling as sm
from .manifold import EigenspaceSpec, parse_spectrum
from .specfun import stirling_defect

log = logging.getLogger(__name__)

LEVEL_QUANTITIES = ("zeros", "level_measure", "excursion", "leray_shell", "leray_coarea", "common_zeros")
POWER_QUANTITIES = ("lp", "int_abs_pow")
QUANTITIES = LEVEL_QUANTITIES + POWER_QUANTITIES + ("sup",)
DISTRIBUTIONS = ("uniform_sphere", "gaussian", "gaussian_normalized", "radial")

# relative allowance for discretization bias, on top of 3 standard errors
GRID_TOLERANCE = {"level_measure": 0.01, "leray_shell": 0.015, "leray_coarea": 0.015}
Z_THRESHOLD = 3.0
MAX_FAILURE_FRACTION = 0.01
RETRY_FACTOR = 4
_CHUNK = 32
_KEYS = ("manifold", "spectrum", "distribution", "quantity", "levels", "samples", "resolution", "master_seed", "epsilon", "output")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration (CLI exit code 2)."""


class TrialFailure(RuntimeError):
    """More than 1% of the trials raised (CLI exit code 3)."""


# -- configuration ------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _builtin_density(kind: str, params: tuple[float, ...]) -> cf.RadialDensity:
    makers = {"gaussian": (cf.RadialDensity.gaussian, 1), "bump": (cf.RadialDensity.bump, 2), "indicator": (cf.RadialDensity.indicator, 2)}
    if kind not in makers:
        raise ConfigError(f"unknown radial profile {kind!r}; use gaussian:σ, bump:r,w, indicator:lo,hi or a CSV path")
    maker, nargs = makers[kind]
    if len(params) != nargs:
        raise ConfigError(f"radial profile {kind} takes {nargs} parameter(s)")
    try:
        return maker(*params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@lru_cache(maxsize=None)
def _table_density(path: str, digest: str) -> cf.RadialDensity:
    rows = []
    for line in Path(path).read_text().splitlines():
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2 or line.lstrip().startswith("#"):
            continue
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            continue  # header
    if not rows:
        raise ConfigError(f"radial table {path} has no numeric rows")
    r, alpha = np.array(rows).T
    try:
        return cf.RadialDensity.from_table(r, alpha, name=f"table:{Path(path).name}")
    except ValueError as exc:
        raise ConfigError(f"radial table {path}: {exc}") from exc


@dataclass(frozen=True)
class Distribution:
    kind: str
    sigma: float | None = None
    profile: str | None = None  # builtin "gaussian:0.7" or a resolved CSV path
    digest: str | None = None  # sha256 of the CSV contents

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian({self.sigma!r})"
        if self.kind == "radial":
            return f"radial({self.profile})" + (f"[sha256:{self.digest[:16]}]" if self.digest else "")
        return self.kind

    def sigma_for(self, spec: EigenspaceSpec) -> float:
        return cf.normalized_sigma(spec) if self.kind == "gaussian_normalized" else self.sigma

    @property
    def density(self) -> cf.RadialDensity:
        if self.digest is not None:
            return _table_density(self.profile, self.digest)
        kind, _, args = self.profile.partition(":")
        return _builtin_density(kind, tuple(float(x) for x in args.split(",") if x.strip()))


def parse_distribution(text: str, base_dir: Path = Path(".")) -> Distribution:
    text = text.strip()
    m = re.fullmatch(r"(\w+)\s*(?:\((.*)\))?", text)
    if not m or m.group(1) not in DISTRIBUTIONS:
        raise ConfigError(f"unknown distribution {text!r}; expected one of {', '.join(DISTRIBUTIONS)}")
    kind, arg = m.group(1), m.group(2)
    if kind in ("uniform_sphere", "gaussian_normalized"):
        if arg is not None:
            raise ConfigError(f"{kind} takes no parameter")
        return Distribution(kind)
    if arg is None or not arg.strip():
        raise ConfigError(f"{kind} needs a parameter, e.g. {kind}(...)")
    if kind == "gaussian":
        sigma = _number(arg, "gaussian sigma")
        if not sigma > 0:
            raise ConfigError("gaussian sigma must be positive")
        return Distribution(kind, sigma=sigma)
    arg = arg.strip()
    if re.fullmatch(r"[a-z]+:[-+0-9.eE, ]+", arg):
        dist = Distribution(kind, profile=arg.replace(" ", ""))
    else:
        path = (base_dir / arg).resolve()
        if not path.is_file():
            raise ConfigError(f"radial table {path} not found")
        dist = Distribution(kind, profile=str(path), digest=hashlib.sha256(path.read_bytes()).hexdigest())
    dist.density  # fail early on bad profiles
    return dist


def _number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{what}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite")
    return value


def _integer(text: str, what: str) -> int:
    try:
        return int(text.strip().replace("_", ""), 0)
    except ValueError:
        raise ConfigError(f"{what}: {text!r} is not an integer") from None


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: str
    spectrum: str
    distribution: Distribution
    quantity: str
    power: float | None
    levels: tuple[float, ...]
    samples: int
    resolution: int
    master_seed: int
    epsilon: float
    output: str = "isogeom-out"

    @cached_property
    def spec(self) -> EigenspaceSpec:
        return parse_spectrum(self.manifold, self.spectrum)

    @property
    def rows(self) -> tuple[float | None, ...]:
        """Row keys of a report: the levels, or a single level-free row."""
        return self.levels if self.quantity in LEVEL_QUANTITIES else (None,)

    @property
    def quantity_label(self) -> str:
        return f"{self.quantity}({self.power:g})" if self.power is not None else self.quantity

    def canonical(self) -> dict:
        return {
            "manifold": self.spec.manifold.id.value,
            "spectrum": self.spec.describe(),
            "distribution": self.distribution.describe(),
            "quantity": self.quantity_label,
            "levels": list(self.levels),
            "samples": self.samples,
            "resolution": self.resolution,
            "master_seed": self.master_seed,
            "epsilon": self.epsilon,
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def parse_config(text: str, base_dir: Path | str = ".", seed: int | None = None) -> ExperimentConfig:
    """Parse and fully validate a config; every problem is a ConfigError."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    raw = dict(parser["experiment"])
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key in ("manifold", "spectrum", "quantity"):
        if not raw.get(key, "").strip():
            raise ConfigError(f"missing required key {key!r}")

    qm = re.fullmatch(r"(\w+)\s*(?:\(\s*([^)]*)\s*\))?", raw["quantity"].strip())
    if not qm or qm.group(1) not in QUANTITIES:
        raise ConfigError(f"unknown quantity {raw['quantity']!r}; expected one of {', '.join(QUANTITIES)}")
    quantity, arg = qm.group(1), qm.group(2)
    power = None
    if quantity in POWER_QUANTITIES:
        if arg is None:
            raise ConfigError(f"{quantity} needs an exponent, e.g. {quantity}(2)")
        power = _number(arg, f"{quantity} exponent")
    elif arg is not None:
        raise ConfigError(f"{quantity} takes no parameter")

    levels_text = raw.get("levels", "0")
    levels = tuple(_number(x, "level") for x in re.split(r"[,\s]+", levels_text.strip()) if x)
    if quantity in LEVEL_QUANTITIES and not levels:
        raise ConfigError("levels must list at least one scaled level")
    if len(set(levels)) != len(levels):
        raise ConfigError("levels must be distinct")

    try:
        spec = parse_spectrum(raw["manifold"], raw["spectrum"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    distribution = parse_distribution(raw.get("distribution", "uniform_sphere"), Path(base_dir))
    samples = _integer(raw.get("samples", "1000"), "samples")
    resolution = _integer(raw["resolution"], "resolution") if "resolution" in raw else es.default_resolution(spec)
    master_seed = seed if seed is not None else _integer(raw.get("master_seed", "0"), "master_seed")
    epsilon = _number(raw.get("epsilon", "0.01"), "epsilon")
    cfg = ExperimentConfig(
        manifold=raw["manifold"].strip(),
        spectrum=raw["spectrum"].strip(),
        distribution=distribution,
        quantity=quantity,
        power=power,
        levels=levels if quantity in LEVEL_QUANTITIES else (),
        samples=samples,
        resolution=resolution,
        master_seed=master_seed,
        epsilon=epsilon,
        output=raw.get("output", "isogeom-out").strip(),
    )
    validate(cfg)
    return cfg


def load_config(path: Path | str, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent, seed)


def validate(cfg: ExperimentConfig) -> None:
    spec, q, kind = cfg.spec, cfg.quantity, cfg.distribution.kind
    if q == "zeros" and spec.m != 1:
        raise ConfigError("zeros counts points on the circle; use level_measure on 2-manifolds")
    if q == "common_zeros" and spec.m != 2:
        raise ConfigError("common_zeros needs a 2-manifold (two equations in two unknowns)")
    if q in ("lp", "sup") and kind != "uniform_sphere":
        raise ConfigError(f"{q} bounds concern the uniform law on the unit sphere")
    if q == "common_zeros" and kind != "uniform_sphere" and any(t != 0 for t in cfg.levels):
        raise ConfigError("common_zeros under non-uniform laws has a closed form only at t = 0")
    if q == "lp" and cfg.power < 1:
        raise ConfigError("lp needs an exponent >= 1")
    if q == "int_abs_pow" and cfg.power <= -1:
        raise ConfigError("int_abs_pow needs an exponent > -1")
    if kind == "uniform_sphere" and q in LEVEL_QUANTITIES and any(abs(t) > 1 for t in cfg.levels):
        raise ConfigError("scaled levels must lie in [-1, 1] under the uniform law (absolute level is c·t)")
    if q in ("leray_shell", "leray_coarea") and kind == "uniform_sphere" and spec.d <= 2 and any(abs(t) == 1 for t in cfg.levels):
        raise ConfigError("the Leray measure is unbounded at |t| = 1 when dim E <= 3")
    if not 0 <= cfg.master_seed < 2**64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    if cfg.samples < 2:
        raise ConfigError("samples must be >= 2")
    if cfg.resolution < 8:
        raise ConfigError("resolution must be >= 8")
    if not cfg.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if spec.m == 2 or q == "zeros":
        try:
            es.check_wavelength(spec, cfg.resolution)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# -- closed forms ---------------------------------------------------------------------------


def closed_form(cfg: ExperimentConfig, t: float | None) -> cf.ClosedForm:
    """The exact mean (or, for lp and sup, the bound) the estimate is compared with."""
    spec, q, dist = cfg.spec, cfg.quantity, cfg.distribution
    if q == "lp":
        return cf.ClosedForm(cf.lp_bound_value(cfg.power), "lp_bound", {"a": cfg.power})
    if q == "sup":
        inputs = dict(m=spec.m, kappa=spec.kappa, c=spec.c, epsilon=0.1)
        return cf.ClosedForm(cf.sup_bound_value(**inputs), "sup_bound", inputs)
    if q == "int_abs_pow":
        a = cfg.power
        if dist.kind == "uniform_sphere":
            inputs = dict(a=a, d=spec.d)
            return cf.ClosedForm(cf.moment_value(**inputs), "moment", inputs)
        if dist.kind == "radial":
            inputs = dict(a=a, d=spec.d, density=dist.density)
            return cf.ClosedForm(cf.radial_moment_value(**inputs), "radial_moment", inputs)
        inputs = dict(a=a, c=spec.c, sigma=dist.sigma_for(spec))
        return cf.ClosedForm(cf.gaussian_moment_value(**inputs), "gaussian_moment", inputs)
    if q == "common_zeros":
        # at t = 0 the count is scale invariant, so every radial law shares the uniform value
        return cf.expected_intersection_measure([spec, spec], [t, t])
    if dist.kind == "uniform_sphere":
        if q in ("zeros", "level_measure"):
            return cf.expected_level_measure(spec, t)
        if q == "excursion":
            return cf.expected_excursion_volume(spec, t)
        return cf.expected_leray(spec, t, strict=False)
    if dist.kind == "radial":
        return _radial_form(spec, dist.density, q, t)
    law = cf.gaussian_expectations(spec, dist.sigma_for(spec), t)
    return _pick(law, q)


def _pick(law: cf.LawExpectations, q: str) -> cf.ClosedForm:
    if q in ("zeros", "level_measure"):
        return law.level_measure
    if q == "excursion":
        return law.excursion_volume
    return law.leray


def _radial_form(spec, density, q, t) -> cf.ClosedForm:
    # radial formulas take t >= 0; negative levels follow from u -> -u
    if t >= 0:
        return _pick(cf.radial_expectations(spec, density, t), q)
    if q == "excursion":
        inputs = dict(volume=spec.volume, d=spec.d, t=float(t), density=density)
        return cf.ClosedForm(cf.radial_excursion_complement_value(**inputs), "radial_excursion_complement", inputs)
    return _pick(cf.radial_expectations(spec, density, -t), q)


def comparison_kind(cfg: ExperimentConfig) -> str:
    return "bound" if cfg.quantity in ("lp", "sup") else "equal"


def tolerance(cfg: ExperimentConfig) -> float:
    if cfg.quantity == "level_measure" and cfg.spec.m == 2:
        return GRID_TOLERANCE["level_measure"]
    return GRID_TOLERANCE.get(cfg.quantity, 0.0)


# -- trials -----------------------------------------------------------------------------------


def draw(cfg: ExperimentConfig, trial_index: int, draw_index: int = 0) -> sm.PolynomialSample:
    seed = sm.SeedPolicy(cfg.master_seed, trial_index)
    dist, spec = cfg.distribution, cfg.spec
    if dist.kind == "uniform_sphere":
        return sm.sample_uniform_sphere(spec, seed, draw_index)
    if dist.kind == "radial":
        return sm.sample_radial(spec, dist.density, seed, draw_index)
    return sm.sample_gaussian(spec, dist.sigma_for(spec), seed, draw_index)


def measure(cfg: ExperimentConfig, trial_index: int) -> np.ndarray:
    """All row values of one trial, measured on the same sample."""
    spec, q, res = cfg.spec, cfg.quantity, cfg.resolution
    u = draw(cfg, trial_index)
    if q == "lp":
        return np.array([es.lp_norm(u, cfg.power, res)])
    if q == "int_abs_pow":
        return np.array([es.integral_abs_power(u, cfg.power, res)])
    if q == "sup":
        return np.array([es.sup_norm(u, res).value])
    c = spec.c
    out = []
    if q == "common_zeros":
        v = draw(cfg, trial_index, draw_index=1)
        for t in cfg.levels:
            out.append(es.common_zero_count(u, v, res, c * t, c * t).count)
        return np.array(out, dtype=float)
    for t in cfg.levels:
        level = c * t
        if q == "zeros":
            out.append(es.count_zeros_circle(u, level, res))
        elif q == "level_measure":
            out.append(es.level_measure(u, level, res).value)
        elif q == "excursion":
            out.append(es.excursion_volume(u, level, res).value)
        elif q == "leray_shell":
            out.append(es.leray_eps_shell(u, level, cfg.epsilon * c, res).value)
        else:
            out.append(es.leray_coarea(u, level, res).value)
    return np.array(out, dtype=float)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("ISOGEOM_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigError(f"ISOGEOM_THREADS={env!r} is not an integer") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


class TrialBatch(NamedTuple):
    values: np.ndarray  # (n_trials, n_rows); NaN rows for failed trials
    failures: tuple[tuple[int, str], ...]


def run_trials(trial: Callable[[int], np.ndarray], indices: range, width: int, threads: int) -> TrialBatch:
    """Evaluate ``trial`` on every index; results land by index, so order of completion is irrelevant."""
    values = np.full((len(indices), width), np.nan)
    failures: list[tuple[int, str]] = []
    start = indices.start

    def work(chunk):
        errs = []
        for i in chunk:
            try:
                values[i - start] = trial(i)
            except Exception as exc:  # counted, and fatal only above the failure budget
                errs.append((i, f"{type(exc).__name__}: {exc}"))
        return errs

    chunks = [indices[k : k + _CHUNK] for k in range(0, len(indices), _CHUNK)]
    if threads == 1:
        results = map(work, chunks)
        for errs in results:
            failures.extend(errs)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for errs in pool.map(work, chunks):
                failures.extend(errs)
    failures.sort()
    return TrialBatch(values, tuple(failures))


# -- statistics -------------------------------------------------------------------------------


class Moments(NamedTuple):
    n: int
    mean: float
    m2: float

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return math.nan
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


def _merge(a: Moments, b: Moments) -> Moments:
    if a.n == 0:
        return b
    if b.n == 0:
        return a
    n = a.n + b.n
    delta = b.mean - a.mean
    return Moments(n, a.mean + delta * b.n / n, a.m2 + b.m2 + delta * delta * a.n * b.n / n)


def pairwise_moments(x: np.ndarray, leaf: int = 8) -> Moments:
    """Mean and M2 by a fixed pairwise tree over the index order; NaNs are skipped.

    The tree shape depends only on len(x), so results are bit-reproducible.
    """
    x = np.asarray(x, dtype=float)
    if len(x) <= leaf:
        n, mean, m2 = 0, 0.0, 0.0
        for v in x:
            if math.isnan(v):
                continue
            n += 1
            delta = v - mean
            mean += delta / n
            m2 += delta * (v - mean)
        return Moments(n, mean, m2)
    half = len(x) // 2
    return _merge(pairwise_moments(x[:half], leaf), pairwise_moments(x[half:], leaf))


def judge(mean: float, stderr: float, reference: float, kind: str, tol: float) -> tuple[float, str]:
    """(z, verdict). Equalities pass within max(3 SE, tol·|ref|); bounds need mean < ref."""
    if kind == "bound":
        z = (mean - reference) / stderr if stderr > 0 else (-math.inf if mean < reference else math.inf)
        return z, "pass" if mean < reference else "fail"
    diff = mean - reference
    if not math.isfinite(reference):
        return math.nan, "fail"
    if stderr > 0:
        z = diff / stderr
    else:
        # deterministic quantities (e.g. two great circles always meet twice)
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(reference)) else math.copysign(math.inf, diff)
    ok = abs(diff) <= max(Z_THRESHOLD * stderr, tol * abs(reference)) or abs(z) <= Z_THRESHOLD
    return z, "pass" if ok else "fail"


@dataclass
class ComparisonReport:
    config_hash: str
    quantity: str
    t_scaled: float | None
    closed_form: cf.ClosedForm
    n: int
    mean: float
    stderr: float
    z: float
    verdict: str
    comparison: str
    tolerance: float
    stage: int = 1
    failures: int = 0
    runtime_seconds: float = 0.0
    notes: tuple[str, ...] = ()

    def recompute_verdict(self) -> str:
        return judge(self.mean, self.stderr, self.closed_form.value, self.comparison, self.tolerance)[1]

    def csv_row(self) -> list:
        return [self.config_hash, self.quantity, _fmt(self.t_scaled), self.n, _fmt(self.mean), _fmt(self.stderr), _fmt(self.closed_form.value), _fmt(self.z), self.verdict]

    def as_record(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "quantity": self.quantity,
            "t_scaled": self.t_scaled,
            "N": self.n,
            "mean": self.mean,
            "stderr": self.stderr,
            "closed_form": self.closed_form.as_record(),
            "z": self.z,
            "verdict": self.verdict,
            "comparison": self.comparison,
            "tolerance": self.tolerance,
            "stage": self.stage,
            "failures": self.failures,
            "notes": list(self.notes),
            "runtime_seconds": self.runtime_seconds,
        }


CSV_COLUMNS = ["config_hash", "quantity", "t_scaled", "N", "mean", "stderr", "closed_form", "z", "verdict"]


def _fmt(x):
    return "" if x is None else repr(float(x))


@dataclass
class SimulationResult:
    config: ExperimentConfig
    reports: list[ComparisonReport]
    values: np.ndarray  # per-trial values of the stage-1 run (plus retry trials when any)
    failures: tuple[tuple[int, str], ...]
    runtime_seconds: float

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.reports)

    def document(self) -> dict:
        return {
            "command": "simulate",
            "config": self.config.canonical(),
            "config_hash": self.config.config_hash,
            "reports": [r.as_record() for r in self.reports],
            "failures": {"count": len(self.failures), "first": [list(f) for f in self.failures[:5]]},
            "runtime_seconds": self.runtime_seconds,
        }


def _check_failures(failures, total):
    if len(failures) > MAX_FAILURE_FRACTION * total:
        detail = "; ".join(f"trial {i}: {msg}" for i, msg in failures[:5])
        raise TrialFailure(f"{len(failures)} of {total} trials failed (budget {MAX_FAILURE_FRACTION:.0%}): {detail}")


def simulate(cfg: ExperimentConfig, threads: int | None = None, retry: bool = True) -> SimulationResult:
    """Run N seeded trials, compare each row with its closed form, rerun failing rows at 4N once."""
    threads = resolve_threads(threads)
    started = time.perf_counter()
    refs = [closed_form(cfg, t) for t in cfg.rows]
    kind, tol = comparison_kind(cfg), tolerance(cfg)
    trial = lambda i: measure(cfg, i)
    batch = run_trials(trial, range(cfg.samples), len(refs), threads)
    _check_failures(batch.failures, cfg.samples)
    values, failures = batch.values, batch.failures

    reports = []
    for j, (t, ref) in enumerate(zip(cfg.rows, refs)):
        mom = pairwise_moments(values[:, j])
        z, verdict = judge(mom.mean, mom.stderr, ref.value, kind, tol)
        notes = ()
        if cfg.quantity == "lp" and cfg.power < 2:
            notes = ("empirical only: the universal bound is proven for a >= 2",)
        reports.append(ComparisonReport(cfg.config_hash, cfg.quantity_label, t, ref, mom.n, mom.mean, mom.stderr, z, verdict, kind, tol, 1, len(failures), notes=notes))

    if retry and kind == "equal" and any(r.verdict == "fail" for r in reports):
        total = RETRY_FACTOR * cfg.samples
        log.info("rerunning %s with %d trials", cfg.config_hash, total)
        extra = run_trials(trial, range(cfg.samples, total), len(refs), threads)
        failures = tuple(sorted(failures + extra.failures))
        _check_failures(failures, total)
        values = np.vstack([values, extra.values])
        for j, rep in enumerate(reports):
            if rep.verdict == "pass":
                continue
            mom = pairwise_moments(values[:, j])
            z, verdict = judge(mom.mean, mom.stderr, rep.closed_form.value, kind, tol)
            reports[j] = dataclasses.replace(rep, n=mom.n, mean=mom.mean, stderr=mom.stderr, z=z, verdict=verdict, stage=2, failures=len(failures))

    runtime = time.perf_counter() - started
    for rep in reports:
        rep.runtime_seconds = runtime
    return SimulationResult(cfg, reports, values, failures, runtime)


# -- expectations table -------------------------------------------------------------------------


def expectation_rows(cfg: ExperimentConfig) -> list[dict]:
    """Every applicable closed form at the configured levels, with d -> ∞ limits."""
    spec = cfg.spec
    model = spec.manifold
    rows = []

    def add(name, t, form, asymptotic=None):
        rows.append({
            "config_hash": cfg.config_hash,
            "quantity": name,
            "t_scaled": t,
            "value": form.value,
            "asymptotic": asymptotic,
            "formula_id": form.formula_id,
            "inputs": form.as_record(),
        })

    levels = cfg.levels or (0.0,)
    for t in levels:
        limits = cf.asymptotic_limits(spec.c * t, model)
        if abs(t) <= 1:
            name = "zeros" if spec.m == 1 else "level_measure"
            add(name, t, cf.expected_level_measure(spec, t), limits.level_measure_per_s * spec.s)
            add("excursion", t, cf.expected_excursion_volume(spec, t), limits.excursion_volume)
            add("leray", t, cf.expected_leray(spec, t, strict=False), limits.leray)
            for l in range(2, model.m + 1):
                add(f"intersection_{l}", t, cf.expected_intersection_measure([spec] * l, [t] * l))
        if cfg.distribution.kind != "uniform_sphere":
            law = cfg.distribution
            if law.kind == "radial":
                forms = [_radial_form(spec, law.density, q, t) for q in ("level_measure", "excursion", "leray_shell")]
            else:
                forms = list(cf.gaussian_expectations(spec, law.sigma_for(spec), t))
            for name, form in zip(("level_measure", "excursion", "leray"), forms):
                add(f"{law.kind}:{name}", t, form)
    powers = [cfg.power] if cfg.power is not None else [1.0, 2.0, 4.0]
    for a in powers:
        add(f"int_abs_pow({a:g})", None, cf.ClosedForm(cf.moment_value(a, spec.d), "moment", {"a": a, "d": spec.d}), cf.moment_limit(a))
        if a >= 1:
            bound = cf.lp_mean_bound(a)
            add(f"lp_bound({a:g})", None, cf.ClosedForm(bound.universal, "lp_bound", {"a": a}), bound.asymptotic)
    sb = cf.sup_mean_bound(spec)
    inputs = dict(m=spec.m, kappa=spec.kappa, c=spec.c, epsilon=0.1)
    add("sup_bound", None, cf.ClosedForm(cf.sup_bound_value(**inputs), "sup_bound", inputs))
    rows[-1]["note"] = sb.note
    return rows


# -- bounds -----------------------------------------------------------------------------------------


BOUND_POWERS = (2.0, 4.0, 8.0)
INKKR_POWERS = (2.0, 4.0)


def inega_check(grid: np.ndarray | None = None) -> tuple[bool, float, float]:
    """1 > (e/t)^{t-1/2} Γ(t)/√π > √(2/e) on a grid of (0.5, 200]; returns (ok, min upper gap, min lower gap)."""
    if grid is None:
        grid = np.linspace(0.5, 200.0, 19951)[1:]
    ratio = np.exp(stirling_defect(grid) - 0.5 * math.log(math.pi))
    upper, lower = 1.0 - ratio, ratio - math.sqrt(2 / math.e)
    return bool(np.all(upper > 0) and np.all(lower > 0)), float(upper.min()), float(lower.min())


@dataclass
class BoundsResult:
    config: ExperimentConfig
    rows: list[dict]
    values: np.ndarray
    failures: tuple[tuple[int, str], ...]
    runtime_seconds: float

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows if r["status"] == "theorem")

    def document(self) -> dict:
        return {
            "command": "bounds",
            "config": self.config.canonical(),
            "config_hash": self.config.config_hash,
            "rows": self.rows,
            "failures": {"count": len(self.failures), "first": [list(f) for f in self.failures[:5]]},
            "runtime_seconds": self.runtime_seconds,
        }


def bounds(cfg: ExperimentConfig, threads: int | None = None) -> BoundsResult:
    """Check the L^a and sup bounds on closed forms and on N uniform samples."""
    if cfg.distribution.kind != "uniform_sphere":
        raise ConfigError("bounds concern the uniform law on the unit sphere")
    threads = resolve_threads(threads)
    started = time.perf_counter()
    spec, res = cfg.spec, cfg.resolution
    powers = sorted(set(BOUND_POWERS) | ({cfg.power} if cfg.quantity == "lp" else set()))
    kk = [powers.index(a) for a in INKKR_POWERS]

    def trial(i):
        u = draw(cfg, i)
        norms = [es.lp_norm(u, a, res) for a in powers]
        sup = es.sup_norm(u, res)
        # refined sup: the local ascent only moves it up towards the true maximum
        holds = [float(sup.value <= es.inkkr_rhs(u, powers[k], norms[k])) for k in kk]
        return np.array(norms + [sup.value] + holds)

    batch = run_trials(trial, range(cfg.samples), len(powers) + 1 + len(kk), threads)
    _check_failures(batch.failures, cfg.samples)
    vals = batch.values
    rows = []
    cfg_hash = cfg.config_hash

    def add(check, a, value, bound, status, passed, note="", stderr=None, n=None, margin=None):
        if margin is None and bound is not None and value is not None:
            margin = bound - value
        rows.append({"config_hash": cfg_hash, "check": check, "a": a, "value": value, "stderr": stderr, "N": n, "bound": bound, "margin": margin, "status": status, "passed": bool(passed), "note": note})

    add("exact_l2", 2.0, 1.0, cf.lp_mean_bound(2.0).universal, "theorem", 1.0 < cf.lp_mean_bound(2.0).universal, "‖u‖₂ = 1 for every unit-norm u")
    for j, a in enumerate(powers):
        b = cf.lp_mean_bound(a)
        status = "theorem" if b.proven else "empirical only"
        jensen = cf.moment_value(a, spec.d) ** (1 / a)
        add("jensen_lp", a, jensen, b.universal, status, jensen < b.universal, "E(a,d)^(1/a) bounds the mean norm from above")
        mom = pairwise_moments(vals[:, j])
        add("empirical_lp", a, mom.mean, b.universal, status, mom.mean < b.universal, stderr=mom.stderr, n=mom.n)
        add("asymptotic_lp", a, b.asymptotic, b.universal, status, b.asymptotic < b.universal, "limsup bound below the universal bound")
    ok, up, lo = inega_check()
    add("gamma_inequality", None, min(up, lo), None, "theorem", ok, margin=min(up, lo), note="smallest gap of 1 > (e/t)^(t-1/2)Γ(t)/√π > √(2/e) on (0.5, 200]")
    sb = cf.sup_mean_bound(spec)
    mom = pairwise_moments(vals[:, len(powers)])
    add("sup_vs_c", None, mom.mean, spec.c, "theorem", mom.mean <= spec.c, stderr=mom.stderr, n=mom.n)
    if math.isfinite(sb.log_bound):
        add("sup_vs_log", None, mom.mean, sb.log_bound, "diagnostic", mom.mean < sb.log_bound, sb.note, stderr=mom.stderr, n=mom.n)
    else:
        add("sup_vs_log", None, mom.mean, None, "diagnostic", True, sb.note, stderr=mom.stderr, n=mom.n)
    for k, a in enumerate(INKKR_POWERS):
        col = vals[:, len(powers) + 1 + k]
        good = col[~np.isnan(col)]
        add("sup_by_lp_samplewise", a, float(good.mean()) if len(good) else math.nan, 1.0, "theorem", bool(np.all(good == 1.0)), "fraction of samples satisfying the sup-by-L^a inequality", n=len(good))
    return BoundsResult(cfg, rows, vals, batch.failures, time.perf_counter() - started)


# -- report files -------------------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _strip_runtime(obj):
    if isinstance(obj, dict):
        return {k: _strip_runtime(v) for k, v in obj.items() if k != "runtime_seconds"}
    if isinstance(obj, list):
        return [_strip_runtime(v) for v in obj]
    return obj


def report_digest(doc: dict) -> str:
    """sha256 of the JSON report without runtime fields."""
    return hashlib.sha256(to_json(_strip_runtime(_clean(doc))).encode()).hexdigest()


def reports_csv(reports: Sequence[ComparisonReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()


def rows_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(k) is None else row.get(k) for k in columns])
    return buf.getvalue()


EXPECT_COLUMNS = ["config_hash", "quantity", "t_scaled", "value", "asymptotic", "formula_id"]
BOUNDS_COLUMNS = ["config_hash", "check", "a", "value", "stderr", "N", "bound", "margin", "status", "passed"]


def write_outputs(out_dir: Path | str, name: str, json_text: str, csv_text: str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / f"{name}.json", "csv": out / f"{name}.csv"}
    paths["json"].write_text(json_text)
    paths["csv"].write_text(csv_text)
    return paths


# -- selftest ---------------------------------------------------------------------------------------


class SuiteResult(NamedTuple):
    name: str
    passed: bool
    failures: tuple[str, ...]


def _suite(name: str, checks: Sequence[tuple[str, Callable[[], bool]]]) -> SuiteResult:
    bad = []
    for label, check in checks:
        try:
            if not check():
                bad.append(label)
        except Exception as exc:
            bad.append(f"{label}: {type(exc).__name__}: {exc}")
    return SuiteResult(name, not bad, tuple(bad))


def selftest(thread_counts: Sequence[int] = (1, 4, 16)) -> list[SuiteResult]:
    from . import selftest as st

    return [
        _suite("specfun", st.specfun_checks()),
        _suite("manifold", st.manifold_checks()),
        _suite("closedform", st.closedform_checks()),
        _suite("sampling", st.sampling_checks()),
        _suite("estimators", st.estimator_checks()),
        _suite("harness", st.harness_checks(thread_counts)),
    ]
