"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes (see cli.py): file-format and
validation problems are user-input errors, non-convergence is a numeric
failure that callers may want to catch and retry with better data.
"""

from __future__ import annotations


class SmartHandError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SmartHandError):
    """A value, structure, or configuration violates a documented invariant."""


class FormatError(SmartHandError):
    """A serialized file cannot be decoded."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(FormatError):
    """File ends before the declared content is complete."""


class BufferLimitError(SmartHandError):
    """Simulated acquisition exceeded the 4096-frame recording buffer."""


class SingularSystemError(SmartHandError):
    """Circuit system has no unique solution (isolated floating nodes)."""


class NonConvergenceError(SmartHandError):
    """Iterative solver failed to reach its tolerance.

    Carries the iteration count and the last residual so callers can
    report how close the solve got.
    """

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(message)
        self.iterations = int(iterations)
        self.residual = float(residual)
