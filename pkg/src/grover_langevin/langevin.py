"""Complex Langevin integration of the auxiliary-field system.

Each field x (sigma, tau, primed and unprimed) follows

    x <- x + K_x(x) * dt + nu * sqrt(2*dt) * xi,    xi ~ N(0, 1) real,

so noise only ever enters the real parts; imaginary parts are generated by
the holomorphic drift.  Randomness comes from numpy's PCG64 generator,
seeded per trajectory from ``SeedSequence(seed, spawn_key=(index,))``, and
each step draws one normal per field in canonical field order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, TextIO

import numpy as np

from .action import (
    OVERLAP_GUARD,
    ObservableSpec,
    all_bitstrings,
    drift_array,
    observable_ratio,
)
from .errors import SingularOverlapError, UsageError
from .exact import GroverLayout
from .fields import FieldAssignment, FieldId, enumerate_fields, field_index, parse_field_name

INIT_KINDS = ("zeros", "gaussian", "explicit")
ESTIMATORS = ("final", "time-average")
GUARD_POLICIES = ("abort", "reject-step")
NOISE_MODES = ("independent", "shared")


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one Langevin run.

    ``init`` is ``"zeros"``, ``"gaussian"`` (real normal with ``init_std``)
    or ``"explicit"`` (``init_values`` in canonical order).  ``window`` is a
    sample count used by the estimators; ``None`` means the trailing fifth
    of the samples.  ``primed_noise="shared"`` reuses each unprimed field's
    draw for its primed copy.
    """

    layout: GroverLayout
    dt: float = 1e-3
    steps: int = 1000
    seed: int = 0
    noise: float = 1.0
    init: str = "zeros"
    init_std: float = 0.1
    init_values: tuple | None = None
    estimator: str = "final"
    window: int | None = None
    normalize: bool = False
    guard_policy: str = "abort"
    sample_every: int = 1
    conv_tol: float = 1e-3
    primed_noise: str = "independent"
    guard: float = OVERLAP_GUARD

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise UsageError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise UsageError(f"steps must be >= 0, got {self.steps}")
        if self.sample_every < 1:
            raise UsageError(f"sample_every must be >= 1, got {self.sample_every}")
        if not self.noise >= 0:
            raise UsageError(f"noise amplitude must be >= 0, got {self.noise}")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if self.init not in INIT_KINDS:
            raise UsageError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        if self.init == "explicit" and self.init_values is None:
            raise UsageError("explicit init needs init_values")
        if self.init == "gaussian" and not self.init_std >= 0:
            raise UsageError(f"init_std must be >= 0, got {self.init_std}")
        if self.estimator not in ESTIMATORS:
            raise UsageError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.guard_policy not in GUARD_POLICIES:
            raise UsageError(f"guard_policy must be one of {GUARD_POLICIES}, got {self.guard_policy!r}")
        if self.primed_noise not in NOISE_MODES:
            raise UsageError(f"primed_noise must be one of {NOISE_MODES}, got {self.primed_noise!r}")
        if self.window is not None and self.window < 1:
            raise UsageError(f"window must be >= 1, got {self.window}")
        if self.conv_tol <= 0:
            raise UsageError(f"conv_tol must be positive, got {self.conv_tol}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.layout.n,
            "k0": self.layout.k0,
            "dt": self.dt,
            "steps": self.steps,
            "seed": self.seed,
            "noise": self.noise,
            "init": self.init,
            "init_std": self.init_std,
            "estimator": self.estimator,
            "window": self.window,
            "normalize": self.normalize,
            "guard_policy": self.guard_policy,
            "sample_every": self.sample_every,
            "conv_tol": self.conv_tol,
            "primed_noise": self.primed_noise,
        }


@dataclass(frozen=True)
class SimState:
    t: float
    fields: FieldAssignment


@dataclass
class Trajectory:
    """Field values sampled every ``sample_every`` steps.

    ``values[i, j]`` is field ``fields[j]`` at time ``times[i]``.
    """

    layout: GroverLayout
    times: np.ndarray
    values: np.ndarray
    rejected_steps: int = 0
    min_overlap_abs: float = math.inf

    @property
    def fields(self) -> tuple[FieldId, ...]:
        return enumerate_fields(self.layout)

    def __len__(self) -> int:
        return len(self.times)

    def series(self, fid: FieldId | str) -> np.ndarray:
        fid = parse_field_name(fid) if isinstance(fid, str) else fid
        return self.values[:, field_index(self.layout)[fid]]

    def state(self, i: int = -1) -> SimState:
        return SimState(float(self.times[i]), FieldAssignment(self.layout, self.values[i]))

    def write_csv(self, fh: TextIO) -> None:
        """Long format: ``t,field,re,im`` with 17 significant digits."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "field", "re", "im"])
        names = [f.name for f in self.fields]
        for t, row in zip(self.times, self.values):
            ts = format(float(t), ".17g")
            for name, v in zip(names, row):
                w.writerow([ts, name, format(v.real, ".17g"), format(v.imag, ".17g")])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """PCG64 stream for trajectory ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def initial_values(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    nf = len(enumerate_fields(cfg.layout))
    if cfg.init == "zeros":
        return np.zeros(nf, dtype=complex)
    if cfg.init == "gaussian":
        return cfg.init_std * rng.standard_normal(nf) + 0j
    vals = np.asarray(cfg.init_values, dtype=complex)
    if vals.shape != (nf,):
        raise UsageError(f"init_values needs {nf} entries, got {vals.size}")
    return vals.copy()


def draw_noise(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """One real normal per field, canonical order."""
    nf = len(enumerate_fields(cfg.layout))
    if cfg.primed_noise == "shared":
        half = rng.standard_normal(nf // 2)
        return np.concatenate([half, half])
    return rng.standard_normal(nf)


def _advance(values: np.ndarray, k: np.ndarray, dt: float, nu: float, xi: np.ndarray) -> np.ndarray:
    out = values + k * dt
    if nu:
        out = out + nu * math.sqrt(2.0 * dt) * xi
    return out


def em_step(s: SimState, cfg: SimConfig, xi: np.ndarray) -> SimState:
    """One Euler-Maruyama step from ``s`` using the real normal draws ``xi``."""
    k, _ = drift_array(cfg.layout, s.fields.values, guard=cfg.guard)
    new = _advance(s.fields.values, k, cfg.dt, cfg.noise, np.asarray(xi, dtype=float))
    if not np.all(np.isfinite(new)):
        raise SingularOverlapError("field values became non-finite")
    return SimState(s.t + cfg.dt, FieldAssignment(cfg.layout, new))


class _Stepper:
    """Integrator state with the drift at the current point cached."""

    def __init__(self, cfg: SimConfig, rng: np.random.Generator, values: np.ndarray):
        self.cfg = cfg
        self.rng = rng
        self.values = values
        self.rejected = 0
        self.k, self.min_abs = self._drift(values)

    def _drift(self, values):
        if not np.all(np.isfinite(values)):
            raise SingularOverlapError("field values became non-finite")
        return drift_array(self.cfg.layout, values, guard=self.cfg.guard)

    def _try(self, values, k, dt):
        new = _advance(values, k, dt, self.cfg.noise, draw_noise(self.cfg, self.rng) if self.cfg.noise else 0.0)
        return new, self._drift(new)

    def step(self) -> None:
        cfg = self.cfg
        try:
            new, (k, m) = self._try(self.values, self.k, cfg.dt)
        except SingularOverlapError:
            if cfg.guard_policy == "abort":
                raise
            # resample and cover dt in two halves; a second failure aborts
            self.rejected += 1
            half = cfg.dt / 2
            mid, (k_mid, m_mid) = self._try(self.values, self.k, half)
            new, (k, m) = self._try(mid, k_mid, half)
            m = min(m, m_mid)
        self.values, self.k = new, k
        self.min_abs = min(self.min_abs, m)


def integrate(cfg: SimConfig, index: int = 0) -> Trajectory:
    """Run ``cfg.steps`` steps for trajectory ``index``; deterministic given the seed."""
    rng = make_rng(cfg.seed, index)
    start = initial_values(cfg, rng)
    n_samples = cfg.steps // cfg.sample_every + 1
    times = np.empty(n_samples)
    values = np.empty((n_samples, len(start)), dtype=complex)
    times[0], values[0] = 0.0, start
    j, i, stepper = 1, 0, None
    try:
        stepper = _Stepper(cfg, rng, start)
        for i in range(1, cfg.steps + 1):
            stepper.step()
            if i % cfg.sample_every == 0:
                times[j], values[j] = i * cfg.dt, stepper.values
                j += 1
    except SingularOverlapError as exc:
        exc.diagnostics = {
            "step": i,
            "t": i * cfg.dt,
            "trajectory": index,
            "rejected_steps": stepper.rejected if stepper else 0,
            "min_overlap_abs": stepper.min_abs if stepper else None,
        }
        raise
    return Trajectory(cfg.layout, times, values, stepper.rejected, stepper.min_abs)


# --- convergence and log fits --------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceStatus:
    """``kind`` is ``converged`` (``value``), ``log-like`` (``a + b*ln t``) or ``drifting``."""

    kind: str
    value: complex | None = None
    a: complex | None = None
    b: complex | None = None

    def at(self, log_t: float, last: complex) -> complex:
        if self.kind == "converged":
            return self.value
        if self.kind == "log-like":
            return self.a + self.b * log_t
        return last

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"status": self.kind}
        for key in ("value", "a", "b"):
            v = getattr(self, key)
            if v is not None:
                out[key] = {"re": v.real, "im": v.imag}
        return out


def _lstsq_residual(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    coef = np.zeros((design.shape[1],), dtype=complex)
    ssr = 0.0
    for part, unit in ((y.real, 1.0), (y.imag, 1j)):
        c, *_ = np.linalg.lstsq(design, part, rcond=None)
        coef = coef + unit * c
        ssr += float(np.sum((design @ c - part) ** 2))
    return coef, ssr


def _fit_log(t: np.ndarray, y: np.ndarray) -> tuple[complex, complex, float]:
    design = np.column_stack([np.ones_like(t), np.log(t)])
    (a, b), ssr = _lstsq_residual(design, y)
    return complex(a), complex(b), ssr


def logfit_extrapolate(tr: Trajectory, fid: FieldId | str, window: int) -> tuple[complex, complex]:
    """Least-squares ``x(t) ~ a + b*ln t`` over the trailing ``window`` samples."""
    if window < 3 or window > len(tr):
        raise UsageError(f"log fit needs 3 <= window <= {len(tr)} samples, got {window}")
    t = tr.times[-window:]
    if np.any(t <= 0):
        raise UsageError("log fit window contains non-positive times")
    a, b, _ = _fit_log(t, tr.series(fid)[-window:])
    return a, b


def detect_convergence(tr: Trajectory, window: int, tol: float) -> dict[FieldId, ConvergenceStatus]:
    """Classify each field over the trailing ``window`` samples."""
    if not 1 <= window <= len(tr):
        raise UsageError(f"window must lie in [1, {len(tr)}], got {window}")
    t = tr.times[-window:]
    positive = t > 0
    out = {}
    for j, fid in enumerate(tr.fields):
        y = tr.values[-window:, j]
        if np.std(y.real) < tol and np.std(y.imag) < tol:
            out[fid] = ConvergenceStatus("converged", value=complex(np.mean(y)))
            continue
        tp, yp = t[positive], y[positive]
        if len(tp) >= 3:
            a, b, log_ssr = _fit_log(tp, yp)
            design = np.column_stack([np.ones_like(tp), tp])
            _, lin_ssr = _lstsq_residual(design, yp)
            if 2.0 * log_ssr < lin_ssr:
                out[fid] = ConvergenceStatus("log-like", a=a, b=b)
                continue
        out[fid] = ConvergenceStatus("drifting")
    return out


# --- estimates ------------------------------------------------------------------------------

@dataclass
class Estimate:
    value: complex | None
    uncertainty: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        if self.value is None:
            return {"re": None, "im": None, "uncertainty": None, "error": self.error}
        return {"re": self.value.real, "im": self.value.imag, "uncertainty": self.uncertainty}


@dataclass
class EstimateReport:
    config: dict[str, Any]
    estimates: dict[str, Estimate]
    convergence: dict[str, dict[str, Any]]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "estimates": {b: e.to_dict() for b, e in self.estimates.items()},
            "convergence": self.convergence,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def default_window(cfg: SimConfig, n_samples: int) -> int:
    if cfg.window is not None:
        return min(cfg.window, n_samples)
    return max(1, min(n_samples, max(3, n_samples // 5)))


def normalize_estimates(estimates: dict[str, Estimate]) -> None:
    """Scale estimates in place so their real parts sum to one."""
    ok = [e for e in estimates.values() if e.value is not None]
    total = math.fsum(e.value.real for e in ok)
    if not ok or total == 0 or not math.isfinite(total):
        return
    for e in ok:
        e.value = e.value / total
        e.uncertainty = e.uncertainty / abs(total)


def _safe_ratio(spec: ObservableSpec, a: FieldAssignment, guard: float) -> complex:
    return observable_ratio(spec, a, guard=guard)


def estimate_observables(tr: Trajectory, cfg: SimConfig) -> EstimateReport:
    """Estimate <|b><b|> for every register bitstring ``b`` from one trajectory."""
    if len(tr) == 0:
        raise UsageError("empty trajectory")
    n = cfg.layout.n
    window = default_window(cfg, len(tr))
    status = detect_convergence(tr, window, cfg.conv_tol)
    specs = {b: ObservableSpec(b) for b in all_bitstrings(n)}
    estimates: dict[str, Estimate] = {}
    singular_samples = 0

    if cfg.estimator == "final":
        t_end = float(tr.times[-1])
        last = tr.values[-1]
        log_like = any(s.kind == "log-like" for s in status.values())
        if log_like and t_end > 0:
            log_ts = [math.log(t_end) + d for d in (0.0, 2.0, 4.0)]
        else:
            log_ts = [math.log(t_end) if t_end > 0 else 0.0]
        points = []
        for lt in log_ts:
            vals = np.array([status[f].at(lt, last[j]) for j, f in enumerate(tr.fields)], dtype=complex)
            points.append(vals)
        for b, spec in specs.items():
            try:
                seq = [_safe_ratio(spec, FieldAssignment(cfg.layout, v), cfg.guard) for v in points]
            except (SingularOverlapError, UsageError) as exc:
                estimates[b] = Estimate(None, error=str(exc))
                continue
            spread = max(abs(s - seq[-1]) for s in seq)
            estimates[b] = Estimate(seq[-1], spread)
    else:
        rows = tr.values[-window:]
        for b, spec in specs.items():
            samples = []
            for row in rows:
                try:
                    samples.append(_safe_ratio(spec, FieldAssignment(cfg.layout, row), cfg.guard))
                except (SingularOverlapError, UsageError):
                    singular_samples += 1
            if not samples:
                estimates[b] = Estimate(None, error="observable singular at every sample in the window")
                continue
            arr = np.array(samples)
            sem = float(np.std(arr) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
            estimates[b] = Estimate(complex(arr.mean()), sem)

    if cfg.normalize:
        normalize_estimates(estimates)

    return EstimateReport(
        config=cfg.to_dict(),
        estimates=estimates,
        convergence={f.name: s.to_dict() for f, s in status.items()},
        diagnostics={
            "rejected_steps": tr.rejected_steps,
            "min_overlap_abs": tr.min_overlap_abs if math.isfinite(tr.min_overlap_abs) else None,
            "singular_observable_samples": singular_samples,
            "window": window,
        },
    )


# --- ensembles --------------------------------------------------------------------------

def run_trajectory(cfg: SimConfig, index: int = 0) -> tuple[Trajectory, EstimateReport]:
    tr = integrate(cfg, index)
    return tr, estimate_observables(tr, cfg)


def run_ensemble(cfg: SimConfig, trajectories: int = 1, jobs: int = 1) -> list[tuple[Trajectory, EstimateReport]]:
    """Independent trajectories ``0..trajectories-1``; identical results for any ``jobs``."""
    if trajectories < 1:
        raise UsageError(f"need at least one trajectory, got {trajectories}")
    if jobs <= 1 or trajectories == 1:
        return [run_trajectory(cfg, i) for i in range(trajectories)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_trajectory, cfg, i) for i in range(trajectories)]
        return [f.result() for f in futures]


def aggregate(reports: list[EstimateReport], cfg: SimConfig) -> EstimateReport:
    """Mean and standard error of each estimate across trajectories.

    With a single trajectory the per-trajectory uncertainty is kept.
    """
    estimates: dict[str, Estimate] = {}
    for b in all_bitstrings(cfg.layout.n):
        vals = [r.estimates[b].value for r in reports if r.estimates[b].value is not None]
        if not vals:
            estimates[b] = Estimate(None, error="no trajectory produced a finite estimate")
            continue
        arr = np.array(vals)
        if len(arr) > 1:
            sem = float(np.std(arr, ddof=1) / math.sqrt(len(arr)))
        else:
            sem = next(r.estimates[b].uncertainty for r in reports if r.estimates[b].value is not None)
        estimates[b] = Estimate(complex(arr.mean()), sem)
    if cfg.normalize:
        normalize_estimates(estimates)
    convergence = {
        f"{i}:{name}": rec for i, r in enumerate(reports) for name, rec in r.convergence.items()
    } if len(reports) > 1 else dict(reports[0].convergence)
    mins = [r.diagnostics["min_overlap_abs"] for r in reports if r.diagnostics["min_overlap_abs"] is not None]
    return EstimateReport(
        config={**cfg.to_dict(), "trajectories": len(reports)},
        estimates=estimates,
        convergence=convergence,
        diagnostics={
            "rejected_steps": sum(r.diagnostics["rejected_steps"] for r in reports),
            "min_overlap_abs": min(mins) if mins else None,
            "singular_observable_samples": sum(r.diagnostics["singular_observable_samples"] for r in reports),
            "wallclock_s": None,
        },
    )
