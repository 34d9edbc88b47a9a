"""Exception types shared across the package.

Each class carries the CLI exit code it maps to, so the front-end can
translate failures without a lookup table.
"""

from __future__ import annotations


class GroverLangevinError(Exception):
    exit_code = 1


class UsageError(GroverLangevinError, ValueError):
    """Invalid argument or precondition violated by the caller."""

    exit_code = 2


class ResourceError(GroverLangevinError):
    """Requested size exceeds the configured dimension cap."""

    exit_code = 1


class SingularOverlapError(GroverLangevinError, ArithmeticError):
    """A world-line overlap (or a quotient denominator) vanished.

    Parameters
    ----------
    qubit : int or None
        1-based qubit label whose overlap fell below the guard, when known.
    value : complex
        The offending value.
    """

    exit_code = 3

    def __init__(self, message: str, qubit: int | None = None, value: complex = 0j):
        super().__init__(message)
        self.qubit = qubit
        self.value = complex(value)


class VerificationFailure(GroverLangevinError):
    exit_code = 4
