"""Auxiliary fields of a Grover layout and the per-qubit world-line operators.

Gate ``k`` runs over ``1..2*k0``: odd gates are the (n+1)-qubit oracle
Toffolis, even gates the n-qubit diffusion Toffolis.  Every gate slot
``s >= 2`` owns a pair of fields ``sigma:k:s`` and ``tau:k:s``; the primed
copies parameterize the bra side of every overlap.  Slot ``s`` of a gate
sits on qubit ``s``, and slot 1 (the sigma-product exponential) on qubit 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import linalg
from .errors import UsageError
from .exact import GroverLayout

_NAME_RE = re.compile(r"^(sigma|tau):(\d+):(\d+)(')?$")


@dataclass(frozen=True, order=True)
class FieldId:
    """Identity of one auxiliary field, e.g. ``tau:2:2'``."""

    kind: str
    gate: int
    slot: int
    primed: bool = False

    def __post_init__(self):
        if self.kind not in ("sigma", "tau"):
            raise UsageError(f"field kind must be 'sigma' or 'tau', got {self.kind!r}")

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.gate}:{self.slot}" + ("'" if self.primed else "")

    @property
    def partner(self) -> "FieldId":
        """The sigma/tau field sharing this field's bilinear term."""
        other = "tau" if self.kind == "sigma" else "sigma"
        return FieldId(other, self.gate, self.slot, self.primed)

    def as_primed(self, primed: bool = True) -> "FieldId":
        return FieldId(self.kind, self.gate, self.slot, primed)

    def sort_key(self):
        return (self.primed, self.gate, self.kind != "sigma", self.slot)

    def __str__(self) -> str:
        return self.name


def parse_field_name(name: str) -> FieldId:
    """Inverse of :attr:`FieldId.name`."""
    m = _NAME_RE.match(name.strip())
    if m is None:
        raise UsageError(f"malformed field name {name!r}; expected e.g. 'sigma:1:2' or \"tau:2:2'\"")
    kind, gate, slot, prime = m.groups()
    return FieldId(kind, int(gate), int(slot), prime is not None)


def gate_slots(layout: GroverLayout, gate: int) -> range:
    """Slots carrying fields for ``gate``: 2..n+1 for oracles, 2..n for diffusions."""
    return range(2, layout.n + 2) if gate % 2 else range(2, layout.n + 1)


@lru_cache(maxsize=None)
def enumerate_fields(layout: GroverLayout) -> tuple[FieldId, ...]:
    """All fields of ``layout`` in canonical order.

    Unprimed before primed; within each, ascending gate, sigma before tau,
    ascending slot.  There are ``2*k0*(4n - 2)`` of them.
    """
    out = []
    for primed in (False, True):
        for gate in range(1, layout.gate_count + 1):
            for kind in ("sigma", "tau"):
                for slot in gate_slots(layout, gate):
                    out.append(FieldId(kind, gate, slot, primed))
    return tuple(out)


def field_count(n: int, k0: int) -> int:
    return 2 * k0 * (4 * n - 2)


def validate_field(layout: GroverLayout, fid: FieldId) -> FieldId:
    if fid not in field_index(layout):
        names = ", ".join(f.name for f in enumerate_fields(layout))
        raise UsageError(f"field {fid.name!r} does not exist for n={layout.n}, k0={layout.k0}; valid: {names}")
    return fid


@lru_cache(maxsize=None)
def field_index(layout: GroverLayout) -> dict[FieldId, int]:
    return {f: i for i, f in enumerate(enumerate_fields(layout))}


class FieldAssignment:
    """Complex value for every field of a layout, stored in canonical order."""

    __slots__ = ("layout", "values")

    def __init__(self, layout: GroverLayout, values):
        values = np.array(values, dtype=complex).reshape(-1)
        expected = len(enumerate_fields(layout))
        if values.shape != (expected,):
            raise UsageError(f"assignment needs {expected} values, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise UsageError("field values must be finite")
        self.layout = layout
        self.values = values
        self.values.flags.writeable = False

    @classmethod
    def zeros(cls, layout: GroverLayout) -> "FieldAssignment":
        return cls(layout, np.zeros(len(enumerate_fields(layout)), dtype=complex))

    @classmethod
    def from_mapping(cls, layout: GroverLayout, mapping: Mapping, default=None) -> "FieldAssignment":
        """Build from ``{FieldId or name: value}``; missing fields take ``default`` or raise."""
        idx = field_index(layout)
        vals = np.full(len(idx), np.nan if default is None else default, dtype=complex)
        for key, v in mapping.items():
            fid = parse_field_name(key) if isinstance(key, str) else key
            validate_field(layout, fid)
            vals[idx[fid]] = v
        if default is None and np.isnan(vals).any():
            missing = [f.name for f, i in idx.items() if np.isnan(vals[i])]
            raise UsageError(f"incomplete assignment; missing {missing}")
        return cls(layout, vals)

    @property
    def fields(self) -> tuple[FieldId, ...]:
        return enumerate_fields(self.layout)

    def __getitem__(self, key) -> complex:
        fid = parse_field_name(key) if isinstance(key, str) else key
        return complex(self.values[field_index(self.layout)[validate_field(self.layout, fid)]])

    def replace(self, updates: Mapping) -> "FieldAssignment":
        vals = self.values.copy()
        idx = field_index(self.layout)
        for key, v in updates.items():
            fid = parse_field_name(key) if isinstance(key, str) else key
            vals[idx[validate_field(self.layout, fid)]] = v
        return FieldAssignment(self.layout, vals)

    def as_dict(self) -> dict[FieldId, complex]:
        return {f: complex(v) for f, v in zip(self.fields, self.values)}

    def __repr__(self) -> str:
        return f"FieldAssignment(n={self.layout.n}, k0={self.layout.k0}, {len(self.values)} fields)"


# --- world lines --------------------------------------------------------------

class Factor(NamedTuple):
    """One factor of a world-line product.

    ``kind`` is ``"const"`` (``matrix`` holds a fixed gate), ``"m1"`` or
    ``"m2"``; for the latter two the exponent argument is the product of
    the values of ``fields``.
    """

    kind: str
    matrix: np.ndarray | None = None
    fields: tuple[FieldId, ...] = ()
    label: str = ""


def _const(name: str) -> Factor:
    return Factor("const", linalg.standard_gate(name), label=name)


def _sig(gate: int, slots: Iterable[int]) -> tuple[FieldId, ...]:
    return tuple(FieldId("sigma", gate, s) for s in slots)


def _tau(gate: int, slot: int) -> tuple[FieldId, ...]:
    return (FieldId("tau", gate, slot),)


@lru_cache(maxsize=None)
def worldline_factors(layout: GroverLayout, l: int) -> tuple[Factor, ...]:
    """Left-to-right factor list of qubit ``l``'s world line (unprimed fields).

    The rightmost factor acts first on |0>.
    """
    n, k0 = layout.n, layout.k0
    if layout.marked != 2 ** n - 1:
        raise UsageError("world lines are only defined for marked = 2**n - 1")
    if not 1 <= l <= n + 1:
        raise UsageError(f"qubit index must lie in [1, {n + 1}], got {l}")
    H, X, Z = _const("H"), _const("X"), _const("Z")
    out: list[Factor] = []
    if l == n + 1:
        out += [X, H]
        for j in range(k0, 0, -1):
            out.append(Factor("m2", fields=_tau(2 * j - 1, n + 1)))
        out += [H, X]
        return tuple(out)
    for j in range(k0, 0, -1):
        odd, even = 2 * j - 1, 2 * j
        if l == 1:
            out += [H, X, Factor("m1", fields=_sig(even, range(2, n + 1))), X, H,
                    Factor("m1", fields=_sig(odd, range(2, n + 2)))]
        elif l < n:
            out += [H, X, Factor("m1", fields=_tau(even, l)), X, H,
                    Factor("m1", fields=_tau(odd, l))]
        else:
            out += [Z, Factor("m2", fields=_tau(even, n)), Z,
                    Factor("m1", fields=_tau(odd, n))]
    out.append(H)
    return tuple(out)


def qubit_fields(layout: GroverLayout, l: int) -> tuple[FieldId, ...]:
    """Unprimed fields that enter qubit ``l``'s world line."""
    seen = []
    for f in worldline_factors(layout, l):
        for fid in f.fields:
            if fid not in seen:
                seen.append(fid)
    return tuple(sorted(seen, key=FieldId.sort_key))


def _factor_matrix(f: Factor, a: FieldAssignment, primed: bool) -> np.ndarray:
    if f.kind == "const":
        return f.matrix
    x = 1.0 + 0j
    for fid in f.fields:
        x *= a[fid.as_primed(primed)]
    # The formal adjoint flips i -> -i: diag/sym entries become m(-x').
    if primed:
        x = -x
    return linalg.m1(x) if f.kind == "m1" else linalg.m2(x)


def worldline(l: int, a: FieldAssignment) -> np.ndarray:
    """U^[l] evaluated at the unprimed fields of ``a``."""
    u = np.eye(2, dtype=complex)
    for f in worldline_factors(a.layout, l):
        u = u @ _factor_matrix(f, a, primed=False)
    return u


def worldline_formal_adjoint(l: int, a: FieldAssignment) -> np.ndarray:
    """Holomorphic conjugate-transpose of U^[l] evaluated at the primed fields.

    Every explicit ``i`` is replaced by ``-i`` and the product is transposed;
    because all constant gates are real and symmetric and m1/m2 are
    symmetric, this is the reversed product with each exponent negated.
    """
    u = np.eye(2, dtype=complex)
    for f in reversed(worldline_factors(a.layout, l)):
        u = u @ _factor_matrix(f, a, primed=True).T
    return u
