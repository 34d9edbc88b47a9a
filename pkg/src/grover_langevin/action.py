"""Action, observable ratios and the holomorphic Langevin drift.

For an assignment of all (complexified) fields the action is

    S = -(pi/2) * sum(sigma*tau - sigma'*tau') + i * sum_l ln z_l,
    z_l = <0| Udag^[l](primed) P^[l] U^[l](unprimed) |0>,

and the drift of field x is K_x = -(i/2) dS/dx.  Derivatives come from
forward-mode dual numbers carried through every world-line product, so
the logarithm itself is never differentiated: d(ln z)/dx = z'/z.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import linalg
from .errors import SingularOverlapError, UsageError
from .exact import GroverLayout
from .fields import (
    FieldAssignment,
    FieldId,
    enumerate_fields,
    field_index,
    worldline,
    worldline_factors,
    worldline_formal_adjoint,
)

#: Rotation angle of every generalized Toffoli exponential.
ALPHA = math.pi / 2
#: Relative cancellation level at which an overlap counts as singular.
OVERLAP_GUARD = 1e-12

_PROJECTORS = {"I": linalg.I2, "0": linalg.P0, "1": linalg.P1}


@dataclass(frozen=True)
class ObservableSpec:
    """Product observable |b><b| on qubits 1..m with optional projectors beyond.

    ``bits`` is the target bitstring for qubits 1..m (qubit 1 first);
    ``projectors`` maps a qubit label ``l > m`` to ``"0"`` or ``"1"``.
    Qubits without an entry use the identity.
    """

    bits: str
    projectors: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise UsageError(f"bits must be a non-empty 0/1 string, got {self.bits!r}")
        for l, p in self.projectors.items():
            if l <= self.m:
                raise UsageError(f"projector on measured qubit {l}")
            if p not in _PROJECTORS:
                raise UsageError(f"projector must be one of I, 0, 1; got {p!r}")

    @property
    def m(self) -> int:
        return len(self.bits)


def is_singular(z: complex, scale: float, guard: float = OVERLAP_GUARD) -> bool:
    """True when ``z = w11*u11 + w12*u21`` has cancelled below ``guard * scale``.

    ``scale`` is ``|w11*u11| + |w12*u21|``.  Measuring against it flags true
    zeros of the overlap while letting a single exponential term decay
    freely; at real fields ``scale`` is of order one.  NaN counts as singular.
    """
    return not (abs(z) >= guard * scale and scale > 0)


@dataclass(frozen=True)
class OverlapTerm:
    qubit: int
    value: complex
    scale: float = 1.0

    @property
    def near_singular(self) -> bool:
        return is_singular(self.value, self.scale)


class DriftVector(FieldAssignment):
    """Drift value K_x for every field of a layout."""

    __slots__ = ()


def _projector(projectors: Mapping[int, str] | None, l: int) -> np.ndarray | None:
    if not projectors or projectors.get(l, "I") == "I":
        return None
    return _PROJECTORS[projectors[l]]


def _overlap_term(l: int, a: FieldAssignment, projectors: Mapping[int, str] | None) -> OverlapTerm:
    w = worldline_formal_adjoint(l, a)
    u = worldline(l, a)
    p = _projector(projectors, l)
    if p is not None:
        w = w @ p
    t0, t1 = w[0, 0] * u[0, 0], w[0, 1] * u[1, 0]
    return OverlapTerm(l, complex(t0 + t1), float(abs(t0) + abs(t1)))


def overlap(l: int, a: FieldAssignment, projectors: Mapping[int, str] | None = None) -> complex:
    """z_l = [Udag^[l] P^[l] U^[l]]_{1,1}."""
    return _overlap_term(l, a, projectors).value


def overlaps(a: FieldAssignment, projectors: Mapping[int, str] | None = None) -> list[OverlapTerm]:
    return [_overlap_term(l, a, projectors) for l in range(1, a.layout.n + 2)]


def _singular(qubit: int, z: complex, what: str = "overlap") -> SingularOverlapError:
    return SingularOverlapError(f"{what} of qubit {qubit} is singular ({z!r})", qubit=qubit, value=z)


def _guard(terms: list[OverlapTerm], guard: float) -> None:
    for t in terms:
        if is_singular(t.value, t.scale, guard):
            raise _singular(t.qubit, t.value)


def bilinear_action(a: FieldAssignment) -> complex:
    """-(pi/2) * sum over gate slots of (sigma*tau - sigma'*tau')."""
    total = 0j
    for f in a.fields:
        if f.kind == "sigma":
            sign = -1.0 if f.primed else 1.0
            total += sign * a[f] * a[f.partner]
    return -ALPHA * total


def action(a: FieldAssignment, projectors: Mapping[int, str] | None = None,
           guard: float = OVERLAP_GUARD) -> complex:
    """S(sigma, tau, sigma', tau') on the principal branch of ln."""
    terms = overlaps(a, projectors)
    _guard(terms, guard)
    return bilinear_action(a) + 1j * sum(cmath.log(t.value) for t in terms)


def observable_ratio(spec: ObservableSpec, a: FieldAssignment, guard: float = OVERLAP_GUARD) -> complex:
    """Estimator of <|b><b|> at one field configuration."""
    if spec.m > a.layout.n:
        raise UsageError(f"observable on {spec.m} qubits but register has {a.layout.n}")
    out = 1.0 + 0j
    for l, bit in enumerate(spec.bits, start=1):
        w = worldline_formal_adjoint(l, a)
        u = worldline(l, a)
        t0, t1 = w[0, 0] * u[0, 0], w[0, 1] * u[1, 0]
        den = t0 + t1
        if is_singular(den, abs(t0) + abs(t1), guard):
            raise _singular(l, den, "observable denominator")
        b = int(bit)
        out *= w[0, b] * u[b, 0] / den
    return complex(out)


def all_bitstrings(m: int) -> list[str]:
    return [format(i, f"0{m}b") for i in range(2 ** m)]


# --- forward-mode dual numbers ---------------------------------------------------
#
# A dual 2x2 matrix is a pair (val, grad): val is a row-major 4-tuple of
# Python complexes and grad[j] is the derivative of val with respect to the
# j-th field local to that world line.  Plain tuples beat numpy at this size.

Mat = tuple  # (m11, m12, m21, m22)


def _mm(A: Mat, B: Mat) -> Mat:
    a, b, c, d = A
    e, f, g, h = B
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


@dataclass(frozen=True)
class _Step:
    kind: str                     # "const", "m1", "m2"
    matrix: Mat | None            # const only
    local: tuple[int, ...] = ()   # indices into the world line's local field list


@dataclass(frozen=True)
class _LinePlan:
    qubit: int
    global_idx: np.ndarray        # local field j -> canonical index
    steps: tuple[_Step, ...]
    sign: float                   # +1 ket side, -1 formal-adjoint side


def _as_tuple(m: np.ndarray) -> Mat:
    return tuple(complex(v) for v in np.asarray(m).reshape(-1))


def _compile(layout: GroverLayout, l: int, primed: bool) -> _LinePlan:
    idx = field_index(layout)
    factors = worldline_factors(layout, l)
    if primed:
        factors = tuple(reversed(factors))
    local: list[int] = []
    steps: list[tuple] = []
    for f in factors:
        if f.kind == "const":
            m = f.matrix.T if primed else f.matrix
            if steps and steps[-1][0] == "const":
                steps[-1] = ("const", steps[-1][1] @ m, ())
            else:
                steps.append(("const", m, ()))
            continue
        js = []
        for fid in f.fields:
            g = idx[fid.as_primed(primed)]
            if g not in local:
                local.append(g)
            js.append(local.index(g))
        steps.append((f.kind, None, tuple(js)))
    compiled = tuple(_Step(k, _as_tuple(m) if m is not None else None, js) for k, m, js in steps)
    return _LinePlan(l, np.array(local, dtype=int), compiled, -1.0 if primed else 1.0)


@lru_cache(maxsize=None)
def _plans(layout: GroverLayout) -> tuple[tuple[_LinePlan, _LinePlan], ...]:
    return tuple((_compile(layout, l, False), _compile(layout, l, True)) for l in range(1, layout.n + 2))


def _dual_product(plan: _LinePlan, x: list[complex]) -> tuple[Mat, list[Mat]]:
    """Value and per-field derivatives of one world-line product."""
    val: Mat = (1 + 0j, 0j, 0j, 1 + 0j)
    grad: list[Mat] = [(0j, 0j, 0j, 0j)] * len(x)
    for st in plan.steps:
        if st.kind == "const":
            C = st.matrix
            val = _mm(val, C)
            grad = [_mm(g, C) for g in grad]
        elif st.kind == "m1":
            xs = [x[j] for j in st.local]
            p = 1 + 0j
            for v in xs:
                p *= v
            e = cmath.exp(-1j * ALPHA * plan.sign * p)
            de = -1j * ALPHA * plan.sign * e
            a, b, c, d = val
            grad = [(g0, g1 * e, g2, g3 * e) for g0, g1, g2, g3 in grad]
            for jj, j in enumerate(st.local):
                # d(prod)/dx_j is the product of the remaining factors
                rest = 1 + 0j
                for kk, v in enumerate(xs):
                    if kk != jj:
                        rest *= v
                s = de * rest
                g0, g1, g2, g3 = grad[j]
                grad[j] = (g0, g1 + b * s, g2, g3 + d * s)
            val = (a, b * e, c, d * e)
        else:
            (j,) = st.local
            e = cmath.exp(-2j * ALPHA * plan.sign * x[j])
            h = -1j * ALPHA * plan.sign * e  # half of d e/dx
            p, q = 0.5 * (1 + e), 0.5 * (1 - e)
            M = (p, q, q, p)
            grad = [_mm(g, M) for g in grad]
            a, b, c, d = val
            g0, g1, g2, g3 = grad[j]
            grad[j] = (g0 + (a - b) * h, g1 + (b - a) * h, g2 + (c - d) * h, g3 + (d - c) * h)
            val = _mm(val, M)
    return val, grad


def _apply_projector(w: Mat, grad: list[Mat], proj: np.ndarray | None) -> tuple[Mat, list[Mat]]:
    if proj is None:
        return w, grad
    P = _as_tuple(proj)
    return _mm(w, P), [_mm(g, P) for g in grad]


def drift_array(layout: GroverLayout, values: np.ndarray, projectors: Mapping[int, str] | None = None,
                guard: float = OVERLAP_GUARD) -> tuple[np.ndarray, float]:
    """Drift for a raw canonical-order value vector.

    Returns ``(K, min_abs_overlap)`` where the second item is the smallest
    ``|z_l|`` seen.  This is the integrator's hot path;
    :func:`drift` wraps it with typed input and output.
    """
    vals = values.tolist()
    dS = np.zeros(len(vals), dtype=complex)
    min_abs = math.inf
    for ket, bra in _plans(layout):
        u, gu = _dual_product(ket, [vals[i] for i in ket.global_idx])
        w, gw = _dual_product(bra, [vals[i] for i in bra.global_idx])
        w, gw = _apply_projector(w, gw, _projector(projectors, ket.qubit))
        t0, t1 = w[0] * u[0], w[1] * u[2]
        z = t0 + t1
        min_abs = min(min_abs, abs(z))
        if is_singular(z, abs(t0) + abs(t1), guard):
            raise _singular(ket.qubit, z)
        iz = 1j / z
        for j, g in enumerate(gu):
            dS[ket.global_idx[j]] += (w[0] * g[0] + w[1] * g[2]) * iz
        for j, g in enumerate(gw):
            dS[bra.global_idx[j]] += (g[0] * u[0] + g[1] * u[2]) * iz
    dS += _bilinear_grad(layout, values)
    return -0.5j * dS, min_abs


@lru_cache(maxsize=None)
def _partners(layout: GroverLayout) -> tuple[np.ndarray, np.ndarray]:
    idx = field_index(layout)
    fields = enumerate_fields(layout)
    partner = np.array([idx[f.partner] for f in fields], dtype=int)
    coeff = np.array([ALPHA if f.primed else -ALPHA for f in fields])
    return partner, coeff


def _bilinear_grad(layout: GroverLayout, values: np.ndarray) -> np.ndarray:
    partner, coeff = _partners(layout)
    return coeff * values[partner]


def drift(a: FieldAssignment, projectors: Mapping[int, str] | None = None,
          guard: float = OVERLAP_GUARD) -> DriftVector:
    """K_x = -(i/2) dS/dx for every field x, sigma and tau, primed and unprimed."""
    k, _ = drift_array(a.layout, a.values, projectors, guard)
    return DriftVector(a.layout, k)


def _log_part_difference(a_plus: FieldAssignment, a_minus: FieldAssignment) -> complex:
    # sum_l ln(z_l(+)/z_l(-)): branch-safe difference of the log terms
    total = 0j
    for l in range(1, a_plus.layout.n + 2):
        tp, tm = _overlap_term(l, a_plus, None), _overlap_term(l, a_minus, None)
        if tp.near_singular or tm.near_singular:
            raise _singular(l, tp.value if tp.near_singular else tm.value)
        total += cmath.log(tp.value / tm.value)
    return total


def action_difference(a_plus: FieldAssignment, a_minus: FieldAssignment) -> complex:
    """S(a_plus) - S(a_minus), free of 2*pi jumps across the ln branch cut."""
    return bilinear_action(a_plus) - bilinear_action(a_minus) + 1j * _log_part_difference(a_plus, a_minus)


def fd_drift(a: FieldAssignment, fid: FieldId, h: float, direction: complex = 1.0) -> complex:
    """Central finite-difference drift along ``direction`` (1 or 1j) in field ``fid``."""
    step = h * direction
    plus = a.replace({fid: a[fid] + step})
    minus = a.replace({fid: a[fid] - step})
    return -0.5j * action_difference(plus, minus) / (2 * step)


def drift_fd_check(a: FieldAssignment, h: float = 1e-5, floor: float = 1e-12) -> float:
    """Largest relative error between :func:`drift` and a real-axis central difference."""
    if not 1e-8 <= h <= 1e-3:
        raise UsageError(f"step h must lie in [1e-8, 1e-3], got {h}")
    k = drift(a)
    worst = 0.0
    for fid in a.fields:
        ref = fd_drift(a, fid, h)
        worst = max(worst, abs(k[fid] - ref) / max(abs(ref), floor))
    return worst
