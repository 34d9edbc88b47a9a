import cmath
import math

import numpy as np
import pytest

import reference as ref
from grover_langevin import action as act
from grover_langevin.errors import SingularOverlapError, UsageError
from grover_langevin.exact import GroverLayout
from grover_langevin.fields import FieldAssignment, enumerate_fields

N2 = GroverLayout(2)


def random_point(layout, rng, re=0.8, im=0.3):
    m = len(enumerate_fields(layout))
    return FieldAssignment(layout, rng.normal(scale=re, size=m) + 1j * rng.normal(scale=im, size=m))


def real_point(layout, rng, scale=1.5):
    half = rng.normal(scale=scale, size=len(enumerate_fields(layout)) // 2)
    return FieldAssignment(layout, np.concatenate([half, half]))


def named(a):
    return {f.name: v for f, v in a.as_dict().items()}


def reference_fd_drift(a, h=1e-5):
    """-(i/2) dS/dx by central differences of the reference action."""
    n, k0 = a.layout.n, a.layout.k0
    out = []
    for f in a.fields:
        plus, minus = named(a.replace({f: a[f] + h})), named(a.replace({f: a[f] - h}))
        d = ref.action(n, k0, plus) - ref.action(n, k0, minus)
        # strip 2*pi jumps of the principal log
        d -= 2 * math.pi * round(d.real / (2 * math.pi))
        out.append(-0.5j * d / (2 * h))
    return np.array(out)


def test_origin_overlaps_and_action():
    a = FieldAssignment.zeros(N2)
    assert all(abs(t.value - 1) < 1e-14 for t in act.overlaps(a))
    assert abs(act.action(a)) < 1e-14


def test_action_matches_reference():
    rng = np.random.default_rng(5)
    for lay in (N2, GroverLayout(3), GroverLayout(3, 1)):
        for _ in range(10):
            a = random_point(lay, rng)
            assert abs(act.action(a) - ref.action(lay.n, lay.k0, named(a))) < 1e-10


def test_bilinear_part():
    a = FieldAssignment.from_mapping(N2, {"sigma:1:2": 2.0, "tau:1:2": 3.0, "sigma:1:2'": 1j, "tau:1:2'": 1.0},
                                     default=0)
    assert act.bilinear_action(a) == pytest.approx(-(math.pi / 2) * (6 - 1j), abs=1e-14)


def test_real_field_laws():
    rng = np.random.default_rng(42)
    for _ in range(200):
        a = real_point(N2, rng)
        assert all(abs(t.value - 1) < 1e-12 for t in act.overlaps(a))
        assert abs(act.action(a)) < 1e-10
        obs = [act.observable_ratio(act.ObservableSpec(b), a) for b in act.all_bitstrings(2)]
        assert abs(sum(obs) - 1) < 1e-10
        assert all(abs(o.imag) < 1e-12 and -1e-12 <= o.real <= 1 + 1e-12 for o in obs)


def test_observable_ratio_matches_reference():
    rng = np.random.default_rng(8)
    lay = GroverLayout(3)
    p = {"0": np.diag([1, 0]).astype(complex), "1": np.diag([0, 1]).astype(complex)}
    for _ in range(5):
        a = random_point(lay, rng)
        d = named(a)
        g = lambda *k: d["%s:%d:%d" % k]
        gp = lambda *k: d["%s:%d:%d'" % k]
        for bits in ("0", "10", "011"):
            expected = 1
            for l, b in enumerate(bits, start=1):
                expected *= ref.overlap(3, 2, g, gp, l, p[b]) / ref.overlap(3, 2, g, gp, l)
            got = act.observable_ratio(act.ObservableSpec(bits), a)
            assert abs(got - expected) < 1e-10 * max(1, abs(expected))


def test_observable_sum_is_one_at_complex_fields():
    # sum over b of |b><b| is the identity, so the ratios add to one anywhere
    rng = np.random.default_rng(9)
    for _ in range(20):
        a = random_point(N2, rng)
        total = sum(act.observable_ratio(act.ObservableSpec(b), a) for b in act.all_bitstrings(2))
        assert abs(total - 1) < 1e-10


def test_observable_spec_validation():
    with pytest.raises(UsageError):
        act.ObservableSpec("012")
    with pytest.raises(UsageError):
        act.ObservableSpec("01", {1: "0"})
    with pytest.raises(UsageError):
        act.observable_ratio(act.ObservableSpec("000"), FieldAssignment.zeros(N2))


def test_hand_derived_origin_drifts():
    k = act.drift(FieldAssignment.zeros(N2))
    assert abs(k["sigma:1:2"]) < 1e-12
    assert abs(k["tau:1:2"] - (-1j * math.pi / 8)) < 1e-12
    assert abs(k["tau:1:3"] - (-1j * math.pi / 2)) < 1e-12
    a = FieldAssignment.from_mapping(N2, {"tau:1:2": 1.0}, default=0)
    assert abs(act.drift(a)["sigma:1:2"] - 1j * math.pi / 4) < 1e-12


@pytest.mark.parametrize("layout", [N2, GroverLayout(3, 1)])
def test_drift_matches_reference_finite_differences(layout):
    rng = np.random.default_rng(layout.n)
    for _ in range(5):
        a = random_point(layout, rng)
        k = act.drift(a).values
        fd = reference_fd_drift(a)
        assert np.max(np.abs(k - fd) / np.maximum(np.abs(fd), 1e-8)) < 1e-6


@pytest.mark.parametrize("layout", [N2, GroverLayout(3)])
def test_drift_fd_check_random_points(layout):
    rng = np.random.default_rng(100 + layout.n)
    worst = max(act.drift_fd_check(random_point(layout, rng)) for _ in range(25))
    assert worst < 1e-6


def test_drift_is_holomorphic_along_imaginary_axis():
    rng = np.random.default_rng(12)
    a = random_point(N2, rng)
    k = act.drift(a)
    for f in a.fields:
        assert abs(act.fd_drift(a, f, 1e-5, 1j) - k[f]) < 1e-8 * max(1, abs(k[f]))


def test_fd_check_step_bounds():
    with pytest.raises(UsageError):
        act.drift_fd_check(FieldAssignment.zeros(N2), h=1e-2)


def test_action_difference_crosses_branch_cut():
    # pick a point where some overlap sits near the negative real axis
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = random_point(N2, rng, re=2.0, im=0.5)
        zs = [t.value for t in act.overlaps(a)]
        if any(z.real < 0 and abs(z.imag) < 0.05 * abs(z) for z in zs):
            break
    else:
        pytest.skip("no point near the branch cut found")
    f = a.fields[0]
    d = act.fd_drift(a, f, 1e-5)
    assert abs(d - act.drift(a)[f]) < 1e-6 * max(1, abs(d))


def test_singular_overlap_is_reported():
    # z_2 = (1 + exp(i*pi*(tau' - tau)/2)) / 2 vanishes at tau' - tau = 2
    a = FieldAssignment.from_mapping(N2, {"tau:1:2'": 2.0}, default=0)
    assert abs(act.overlap(2, a)) < 1e-15
    with pytest.raises(SingularOverlapError) as exc:
        act.action(a)
    assert exc.value.qubit == 2
    with pytest.raises(SingularOverlapError):
        act.drift(a)


def test_guard_is_relative_to_term_size():
    assert act.is_singular(1e-13, 1.0)
    assert not act.is_singular(1e-20, 1e-20)
    assert act.is_singular(complex("nan"), 1.0)
    assert act.is_singular(0j, 0.0)


def test_drift_array_reports_minimum_overlap():
    k, zmin = act.drift_array(N2, np.zeros(12, dtype=complex))
    assert zmin == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(k, act.drift(FieldAssignment.zeros(N2)).values)
