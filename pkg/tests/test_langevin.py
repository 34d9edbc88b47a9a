import csv
import io
import json
import math

import numpy as np
import pytest

from grover_langevin import langevin as lv
from grover_langevin.action import drift
from grover_langevin.errors import SingularOverlapError, UsageError
from grover_langevin.exact import GroverLayout
from grover_langevin.fields import FieldAssignment, enumerate_fields

N2 = GroverLayout(2)
NF = 12
# tau:1:2' - tau:1:2 = 2 makes the qubit-2 overlap vanish
SINGULAR = FieldAssignment.from_mapping(N2, {"tau:1:2'": 2.0}, default=0)


def synthetic(series, times):
    """Trajectory where every field follows ``series``."""
    values = np.repeat(np.asarray(series, dtype=complex)[:, None], NF, axis=1)
    return lv.Trajectory(N2, np.asarray(times, dtype=float), values)


def cfg(**kw):
    return lv.SimConfig(N2, **kw)


# --- configuration ------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(dt=0), dict(dt=-1e-3), dict(steps=-1), dict(sample_every=0),
                                dict(noise=-1), dict(init="uniform"), dict(estimator="median"),
                                dict(guard_policy="retry"), dict(init="explicit"), dict(window=0),
                                dict(primed_noise="mirror"), dict(seed=-1)])
def test_invalid_config_rejected(kw):
    with pytest.raises(UsageError):
        cfg(**kw)


# --- single steps -------------------------------------------------------------------

def test_origin_step_without_noise():
    c = cfg(noise=0.0, dt=1e-3)
    s = lv.SimState(0.0, FieldAssignment.zeros(N2))
    out = lv.em_step(s, c, np.zeros(NF))
    assert out.t == pytest.approx(1e-3)
    assert abs(out.fields["tau:1:2"] - (-1j * math.pi / 8) * 1e-3) < 1e-15
    assert out.fields["sigma:1:2"] == 0


def test_noise_enters_real_part_only():
    c = cfg(noise=0.5, dt=1e-2)
    s = lv.SimState(0.0, FieldAssignment.zeros(N2))
    xi = np.arange(NF, dtype=float)
    diff = lv.em_step(s, c, xi).fields.values - lv.em_step(s, cfg(noise=0.0, dt=1e-2), xi).fields.values
    assert np.allclose(diff, 0.5 * math.sqrt(2e-2) * xi, atol=1e-15)


def test_noiseless_runs_do_not_depend_on_seed():
    a = lv.integrate(cfg(noise=0.0, steps=50, seed=1))
    b = lv.integrate(cfg(noise=0.0, steps=50, seed=99), index=3)
    assert np.array_equal(a.values, b.values)


def test_richardson_consistency():
    rng = np.random.default_rng(2)
    errs = []
    x0 = FieldAssignment(N2, 0.5 * rng.normal(size=NF) + 0.1j * rng.normal(size=NF))
    for dt in (1e-2, 5e-3):
        c_full, c_half = cfg(noise=0.0, dt=dt), cfg(noise=0.0, dt=dt / 2)
        s = lv.SimState(0.0, x0)
        one = lv.em_step(s, c_full, np.zeros(NF))
        two = lv.em_step(lv.em_step(s, c_half, np.zeros(NF)), c_half, np.zeros(NF))
        errs.append(np.abs(one.fields.values - two.fields.values).max())
    assert errs[0] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_singular_step_raises():
    c = cfg(noise=0.0)
    with pytest.raises(SingularOverlapError):
        lv.em_step(lv.SimState(0.0, SINGULAR), c, np.zeros(NF))


# --- integration --------------------------------------------------------------------

def test_zero_steps_keeps_initial_state():
    tr = lv.integrate(cfg(steps=0, init="gaussian"))
    assert len(tr) == 1 and tr.times[0] == 0
    assert np.array_equal(tr.values[0], lv.initial_values(cfg(init="gaussian"), lv.make_rng(0, 0)))


def test_same_seed_is_bit_identical():
    c = cfg(steps=300, noise=1.0, seed=7, sample_every=10)
    a, b = lv.integrate(c), lv.integrate(c)
    assert np.array_equal(a.values, b.values) and a.to_csv() == b.to_csv()
    assert not np.array_equal(a.values, lv.integrate(c, index=1).values)


def test_sampling_and_times():
    tr = lv.integrate(cfg(steps=100, sample_every=25, noise=0.3))
    assert np.allclose(tr.times, [0, 0.025, 0.05, 0.075, 0.1])
    assert np.all(np.diff(tr.times) > 0)


def test_shared_primed_noise():
    c = cfg(primed_noise="shared")
    xi = lv.draw_noise(c, lv.make_rng(0))
    assert np.array_equal(xi[:6], xi[6:])
    assert not np.array_equal(*np.split(lv.draw_noise(cfg(), lv.make_rng(0)), 2))


def test_noiseless_flow_preserves_unprimed_primed_symmetry():
    # with x' = conj(x) initially and no noise, the flow keeps x' = conj(x)
    rng = np.random.default_rng(1)
    half = 0.2 * rng.normal(size=6)
    tr = lv.integrate(cfg(noise=0.0, steps=200, init="explicit", init_values=tuple(np.r_[half, half])))
    last = tr.values[-1]
    assert np.allclose(last[6:], np.conj(last[:6]), atol=1e-12)


@pytest.mark.parametrize("dt", [1e-2, 1e-3, 1e-4])
def test_step_size_robustness(dt):
    c = cfg(dt=dt, steps=int(round(1 / dt)), noise=1.0, guard_policy="reject-step",
            sample_every=max(1, int(round(0.01 / dt))), normalize=True)
    tr, rep = lv.run_trajectory(c)
    assert np.all(np.isfinite(tr.values))
    for e in rep.estimates.values():
        assert e.value is not None and math.isfinite(e.value.real) and math.isfinite(e.value.imag)


def test_abort_carries_diagnostics():
    c = cfg(noise=0.0, init="explicit", init_values=tuple(SINGULAR.values))
    with pytest.raises(SingularOverlapError) as exc:
        lv.integrate(c)
    d = exc.value.diagnostics
    assert d["step"] == 0 and d["t"] == 0 and d["min_overlap_abs"] is None
    assert set(d) == {"step", "t", "trajectory", "rejected_steps", "min_overlap_abs"}


@pytest.mark.xfail(strict=True, raises=SingularOverlapError,
                   reason="unit-noise runs grow unbounded imaginary parts and hit a singular overlap before t = 100")
def test_long_unit_noise_run_completes():
    tr = lv.integrate(cfg(noise=1.0, dt=1e-3, steps=100_000, sample_every=1000, guard_policy="reject-step"))
    assert math.isfinite(tr.min_overlap_abs)


def test_long_weak_noise_run_completes_with_diagnostics():
    c = cfg(noise=0.1, dt=1e-3, steps=100_000, sample_every=1000, guard_policy="reject-step")
    tr, rep = lv.run_trajectory(c)
    assert len(tr) == 101
    assert 0 < rep.diagnostics["min_overlap_abs"] <= 1


# --- convergence and fits -----------------------------------------------------------

T = np.linspace(1, 100, 400)


def test_constant_trajectory_converges():
    st = lv.detect_convergence(synthetic(np.full(len(T), 0.3 - 0.2j), T), 100, 1e-3)
    assert all(s.kind == "converged" and s.value == pytest.approx(0.3 - 0.2j) for s in st.values())


def test_log_trajectory_is_log_like():
    st = lv.detect_convergence(synthetic(2 + 0.5 * np.log(T), T), 200, 1e-3)
    s = st[enumerate_fields(N2)[0]]
    assert s.kind == "log-like"
    assert s.a.real == pytest.approx(2, rel=0.05) and s.b.real == pytest.approx(0.5, rel=0.05)


def test_random_walk_is_drifting():
    rng = np.random.default_rng(3)
    walk = np.cumsum(rng.normal(size=len(T))) + 1j * np.cumsum(rng.normal(size=len(T)))
    st = lv.detect_convergence(synthetic(walk, T), 200, 0.01)
    assert all(s.kind == "drifting" for s in st.values())


def test_logfit_constant():
    a, b = lv.logfit_extrapolate(synthetic(np.full(len(T), 1.5 + 2j), T), "tau:1:2", 50)
    assert a == pytest.approx(1.5 + 2j, abs=1e-12) and abs(b) < 1e-12


def test_logfit_recovers_parameters():
    a0, b0 = 1 - 0.3j, 0.2
    a, b = lv.logfit_extrapolate(synthetic(a0 + b0 * np.log(T), T), "sigma:1:2", 100)
    assert abs(a - a0) <= 0.01 * abs(a0) and abs(b - b0) <= 0.01 * abs(b0)


def test_logfit_with_noise():
    rng = np.random.default_rng(5)
    a0, b0 = 1 - 0.3j, 0.2
    y = a0 + b0 * np.log(T) + 0.01 * (rng.normal(size=len(T)) + 1j * rng.normal(size=len(T)))
    a, b = lv.logfit_extrapolate(synthetic(y, T), "sigma:1:2", len(T))
    assert abs(a - a0) <= 0.05 * abs(a0) and abs(b - b0) <= 0.05 * abs(b0)


def test_logfit_degenerate_windows():
    tr = synthetic(np.ones(5), [0, 1, 2, 3, 4])
    with pytest.raises(UsageError):
        lv.logfit_extrapolate(tr, "sigma:1:2", 2)
    with pytest.raises(UsageError):
        lv.logfit_extrapolate(tr, "sigma:1:2", 5)


# --- estimates ----------------------------------------------------------------------

@pytest.mark.parametrize("estimator", ["final", "time-average"])
def test_frozen_origin_gives_uniform_estimates(estimator):
    tr = synthetic(np.zeros(20), np.arange(20) * 0.1)
    rep = lv.estimate_observables(tr, cfg(estimator=estimator))
    for b in ("00", "01", "10", "11"):
        assert rep.estimates[b].value == pytest.approx(0.25, abs=1e-14)


def test_log_like_fields_use_extrapolation_sequence():
    tr = synthetic(0.01 * np.log(T), T)
    rep = lv.estimate_observables(tr, cfg(window=200))
    assert all(r["status"] == "log-like" for r in rep.convergence.values())
    assert all(e.uncertainty > 0 for e in rep.estimates.values())


def test_normalization_sums_to_one():
    tr = lv.integrate(cfg(steps=500, noise=1.0, sample_every=10, seed=4))
    for estimator in ("final", "time-average"):
        rep = lv.estimate_observables(tr, cfg(estimator=estimator, normalize=True))
        assert abs(math.fsum(e.value.real for e in rep.estimates.values()) - 1) <= 4 * 2.3e-16


def test_singular_observable_reported_not_fatal():
    bad = SINGULAR.values
    tr = lv.Trajectory(N2, np.array([0.0, 1.0]), np.array([bad, bad]))
    rep = lv.estimate_observables(tr, cfg())
    assert all(e.value is None and e.error for e in rep.estimates.values())
    rep = lv.estimate_observables(tr, cfg(estimator="time-average"))
    assert rep.diagnostics["singular_observable_samples"] == 8


def test_parallel_ensemble_matches_serial():
    c = cfg(steps=200, noise=1.0, sample_every=20)
    serial = lv.run_ensemble(c, 3, jobs=1)
    parallel = lv.run_ensemble(c, 3, jobs=2)
    for (ta, ra), (tb, rb) in zip(serial, parallel):
        assert np.array_equal(ta.values, tb.values) and ra.to_json() == rb.to_json()


def test_aggregate_standard_error():
    c = cfg(steps=200, noise=1.0, sample_every=20, estimator="time-average")
    reports = [r for _, r in lv.run_ensemble(c, 4)]
    agg = lv.aggregate(reports, c)
    vals = np.array([r.estimates["11"].value for r in reports])
    assert agg.estimates["11"].value == pytest.approx(vals.mean())
    assert agg.estimates["11"].uncertainty == pytest.approx(np.std(vals, ddof=1) / 2)
    assert agg.config["trajectories"] == 4


# --- file formats -------------------------------------------------------------------

def test_csv_format():
    tr = lv.integrate(cfg(steps=2, noise=1.0))
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "field", "re", "im"]
    assert len(rows) == 1 + 3 * NF
    assert [r[1] for r in rows[1:NF + 1]] == [f.name for f in enumerate_fields(N2)]
    assert float(rows[-1][0]) == pytest.approx(2e-3)
    v = complex(float(rows[-1][2]), float(rows[-1][3]))
    assert v == tr.values[-1, -1]  # 17 significant digits round-trip exactly


def test_report_json_schema():
    _, rep = lv.run_trajectory(cfg(steps=10))
    d = json.loads(rep.to_json())
    assert set(d) == {"config", "estimates", "convergence", "diagnostics"}
    assert set(d["estimates"]) == {"00", "01", "10", "11"}
    assert set(d["estimates"]["00"]) == {"re", "im", "uncertainty"}
    assert set(d["convergence"]) == {f.name for f in enumerate_fields(N2)}
    assert {"rejected_steps", "min_overlap_abs"} <= set(d["diagnostics"])


def test_drift_used_by_integrator_matches_action_drift():
    rng = np.random.default_rng(6)
    a = FieldAssignment(N2, 0.3 * rng.normal(size=NF))
    out = lv.em_step(lv.SimState(0.0, a), cfg(noise=0.0, dt=1e-3), np.zeros(NF))
    assert np.allclose(out.fields.values, a.values + 1e-3 * drift(a).values, atol=1e-15)
