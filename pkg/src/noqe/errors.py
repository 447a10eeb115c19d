"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration / input problems -> 2,
data-file problems -> 3, numerical failures -> 4.
"""

from __future__ import annotations


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class ResourceError(RuntimeError):
    """A request would exceed a hard resource guardrail (e.g. qubit count)."""


class ParseError(ValueError):
    """Malformed input file (Hamiltonian, circuit, or config)."""


class FormatError(ValueError):
    """Malformed or corrupt dataset file; message names the offending record."""


class UnreliableDivisionError(RuntimeError):
    """Overlap magnitude too small to divide by safely.

    Carries both estimates so callers can report them.
    """

    def __init__(self, message: str, numerator: complex, overlap: complex):
        super().__init__(message)
        self.numerator = numerator
        self.overlap = overlap


class DegenerateSubspaceError(RuntimeError):
    """Overlap-matrix conditioning left no retained subspace."""


class EstimateError(RuntimeError):
    """An estimator could not produce a usable value (e.g. n < m)."""
