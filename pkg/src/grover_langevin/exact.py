"""Exact statevector reference for Grover search.

Two simulations are provided: the textbook phase-oracle form acting on the
n-qubit register alone, and the full (n+1)-qubit circuit in which both the
oracle and the diffusion step are generalized Toffoli gates and the
ancilla carries the |-> state.  Qubit 1 is the most significant bit of a
basis index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ResourceError, UsageError


def k0_iterations(n: int) -> int:
    """Number of Grover iterations, ``round(pi/(2*theta) - 1/2)``.

    ``theta = 2*arccos(sqrt(1 - 2**-n))``; rounding is half away from zero.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise UsageError(f"n must be an integer >= 2, got {n!r}")
    theta = 2.0 * math.acos(math.sqrt(1.0 - 1.0 / 2 ** n))
    y = math.pi / (2.0 * theta) - 0.5
    return int(math.copysign(math.floor(abs(y) + 0.5), y))


@dataclass(frozen=True)
class GroverLayout:
    """Register size, iteration count and marked element of one Grover run.

    ``k0`` defaults to :func:`k0_iterations` and ``marked`` to ``2**n - 1``.
    """

    n: int
    k0: int | None = None
    marked: int | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise UsageError(f"n must be an integer >= 2, got {self.n!r}")
        if self.k0 is None:
            object.__setattr__(self, "k0", k0_iterations(self.n))
        elif self.k0 < 0:
            raise UsageError(f"k0 must be >= 0, got {self.k0}")
        if self.marked is None:
            object.__setattr__(self, "marked", 2 ** self.n - 1)
        elif not 0 <= self.marked < 2 ** self.n:
            raise UsageError(f"marked must lie in [0, {2 ** self.n - 1}], got {self.marked}")

    @property
    def N(self) -> int:
        return 2 ** self.n

    @property
    def gate_count(self) -> int:
        """Generalized Toffoli gates in the circuit (oracle and diffusion per iteration)."""
        return 2 * self.k0


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Measurement probabilities indexed by basis state."""

    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError("probabilities outside [0, 1]")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probs", p)

    def __getitem__(self, index: int) -> float:
        return float(self.probs[index])

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def outcomes(self) -> list[tuple[int, float]]:
        return [(i, float(p)) for i, p in enumerate(self.probs)]


def success_probability(n: int, k: int) -> float:
    """Closed-form probability of the marked element after ``k`` iterations."""
    return math.sin((2 * k + 1) * math.asin(2.0 ** (-n / 2))) ** 2


def generalized_toffoli(m: int, max_qubits: int = linalg.MAX_QUBITS) -> np.ndarray:
    """Dense m-qubit gate flipping the last qubit when all others are 1."""
    if m < 2:
        raise ResourceError(f"generalized Toffoli needs m >= 2, got {m}")
    if m > max_qubits:
        raise ResourceError(f"generalized Toffoli on {m} qubits exceeds cap {max_qubits}")
    dim = 2 ** m
    g = np.eye(dim, dtype=complex)
    g[dim - 2:, dim - 2:] = linalg.X
    return g


def toffoli_generator(m: int) -> np.ndarray:
    """(|1><1|)^(m-1) (x) (1 - sigma_x), whose pi/2 exponential is the Toffoli."""
    return linalg.kron_all([linalg.P1] * (m - 1) + [linalg.I2 - linalg.X])


def decomposition_residual(m: int) -> float:
    """Max-entry distance between exp(-i*pi/2*generator) and the generalized Toffoli."""
    if not 2 <= m <= 6:
        raise UsageError(f"decomposition_residual supports 2 <= m <= 6, got {m}")
    lhs = linalg.expm(-0.5j * math.pi * toffoli_generator(m))
    return linalg.max_abs_diff(lhs, generalized_toffoli(m))


def run_phase_oracle(layout: GroverLayout) -> ProbabilityDistribution:
    """Grover iterations on the bare register: sign flip, then inversion about the mean."""
    if layout.n > linalg.MAX_QUBITS:
        raise ResourceError(f"n = {layout.n} exceeds cap {linalg.MAX_QUBITS}")
    psi = np.full(layout.N, 1.0 / math.sqrt(layout.N), dtype=complex)
    for _ in range(layout.k0):
        psi[layout.marked] = -psi[layout.marked]
        psi = 2.0 * psi.mean() - psi
    return ProbabilityDistribution(np.abs(psi) ** 2)


# --- full circuit -----------------------------------------------------------

def _apply_1q(state: np.ndarray, gate: np.ndarray, q: int) -> np.ndarray:
    """Apply a 2x2 gate to axis ``q`` (0-based) of a (2,)*m tensor."""
    out = np.tensordot(gate, state, axes=([1], [q]))
    return np.moveaxis(out, 0, q)


def _apply_mcx(state: np.ndarray, controls: list[int], target: int) -> np.ndarray:
    """Multi-controlled X: swap the target's 0/1 slices where every control is 1."""
    out = state.copy()
    idx0 = [slice(None)] * state.ndim
    for c in controls:
        idx0[c] = 1
    idx1 = list(idx0)
    idx0[target] = 0
    idx1[target] = 1
    out[tuple(idx0)] = state[tuple(idx1)]
    out[tuple(idx1)] = state[tuple(idx0)]
    return out


def run_full_circuit(layout: GroverLayout) -> ProbabilityDistribution:
    """Simulate the (n+1)-qubit circuit gate by gate and marginalize the ancilla.

    Per iteration the oracle is an (n+1)-qubit Toffoli onto the ancilla,
    X-conjugated on register qubits where ``marked`` has a zero bit; the
    diffusion is H.X on the register, an n-qubit Toffoli onto qubit n
    wrapped in Hadamards on that qubit, then X.H.
    """
    n = layout.n
    m = n + 1
    if m > linalg.MAX_QUBITS:
        raise ResourceError(f"full circuit needs {m} qubits (cap {linalg.MAX_QUBITS})")
    state = np.zeros((2,) * m, dtype=complex)
    state[(0,) * m] = 1.0
    register = list(range(n))
    anc = n
    zero_bits = [q for q in register if not (layout.marked >> (n - 1 - q)) & 1]

    for q in register:
        state = _apply_1q(state, linalg.H, q)
    state = _apply_1q(state, linalg.X, anc)
    state = _apply_1q(state, linalg.H, anc)

    for _ in range(layout.k0):
        for q in zero_bits:
            state = _apply_1q(state, linalg.X, q)
        state = _apply_mcx(state, register, anc)
        for q in zero_bits:
            state = _apply_1q(state, linalg.X, q)

        for q in register:
            state = _apply_1q(state, linalg.H, q)
            state = _apply_1q(state, linalg.X, q)
        state = _apply_1q(state, linalg.H, n - 1)
        state = _apply_mcx(state, register[:-1], n - 1)
        state = _apply_1q(state, linalg.H, n - 1)
        for q in register:
            state = _apply_1q(state, linalg.X, q)
            state = _apply_1q(state, linalg.H, q)

    state = _apply_1q(state, linalg.H, anc)
    state = _apply_1q(state, linalg.X, anc)
    probs = (np.abs(state) ** 2).sum(axis=anc).reshape(-1)
    return ProbabilityDistribution(probs)
