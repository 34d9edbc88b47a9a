"""Complex 2x2 and dense matrix helpers.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; a world-line
operator is a (2, 2) array, a dense operator is (2**m, 2**m) and a state is
a 1-D array of length 2**m.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ResourceError, UsageError

#: Largest qubit count a dense matrix or state may span unless overridden.
MAX_QUBITS = 12

_SQRT1_2 = 1.0 / math.sqrt(2.0)

_GATES = {
    "H": np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "I": np.eye(2, dtype=complex),
}

#: Projector (1 - sigma_z)/2 onto |1>.
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
#: Projector (1 + sigma_z)/2 onto |0>.
P0 = np.array([[1, 0], [0, 0]], dtype=complex)


def standard_gate(name: str) -> np.ndarray:
    """Return a copy of the named one-qubit gate (``H``, ``X``, ``Z`` or ``I``)."""
    try:
        return _GATES[name.upper()].copy()
    except (KeyError, AttributeError):
        raise UsageError(f"unknown gate {name!r}; expected one of H, X, Z, I") from None


H = standard_gate("H")
X = standard_gate("X")
Z = standard_gate("Z")
I2 = standard_gate("I")


def m1(x: complex) -> np.ndarray:
    """diag(1, exp(-i*pi/2*x)): the exponential of a |1><1| generator."""
    return np.array([[1, 0], [0, np.exp(-0.5j * math.pi * x)]], dtype=complex)


def m2(x: complex) -> np.ndarray:
    """exp(-i*pi/2*x*(1 - sigma_x)) written out entrywise."""
    e = np.exp(-1j * math.pi * x)
    return 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]], dtype=complex)


def _check_square(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {a.shape}")


def num_qubits(dim: int) -> int:
    m = dim.bit_length() - 1
    if dim < 2 or 1 << m != dim:
        raise UsageError(f"dimension {dim} is not a power of two >= 2")
    return m


def kron(a: np.ndarray, b: np.ndarray, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Kronecker product with a cap on the resulting qubit count."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_square(a)
    _check_square(b)
    m = num_qubits(a.shape[0]) + num_qubits(b.shape[0])
    if m > max_qubits:
        raise ResourceError(f"kron would span {m} qubits (cap {max_qubits})")
    return np.kron(a, b)


def kron_all(mats, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    mats = list(mats)
    if not mats:
        raise UsageError("kron_all needs at least one factor")
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = kron(out, m, max_qubits=max_qubits)
    return out


def expm(g: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a Taylor kernel.

    The argument is scaled by ``2**-s`` until its 1-norm is at most 1/2, the
    series is summed until terms stop changing the result in double
    precision, and the result is squared ``s`` times.
    """
    g = np.asarray(g, dtype=complex)
    _check_square(g)
    if not np.all(np.isfinite(g)):
        raise UsageError("expm input has non-finite entries")
    norm = np.linalg.norm(g, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    a = g / (2.0 ** s)
    n = g.shape[0]
    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        if np.abs(term).max() <= 1e-18 * max(1.0, np.abs(result).max()):
            break
    for _ in range(s):
        result = result @ result
    return result


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def max_abs_diff(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
