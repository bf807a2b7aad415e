"""Exception hierarchy for ``qhom``."""

from __future__ import annotations


class QhomError(Exception):
    """Base error for the ``qhom`` toolkit."""


class LegMismatchError(QhomError):
    """Raised when tensor legs do not have the required names, sizes or bars."""


class LegCollisionError(QhomError):
    """Raised when a tensor product would repeat a leg."""


class DimensionMismatchError(QhomError):
    """Raised when sizes or index sets of two operands disagree."""


class QuadMismatchError(DimensionMismatchError):
    """Raised when a correlation's quad does not match an instance or partner."""


class NonHermitianError(QhomError):
    """Raised when a matrix expected to be Hermitian is not, beyond tolerance."""


class InvalidChannelError(QhomError):
    """Raised when a map fails complete positivity or trace preservation."""


class NotNoSignallingError(QhomError):
    """Raised when a channel fails the no-signalling conditions.

    Parameters
    ----------
    message:
        Human readable description.
    residuals:
        Per-condition residuals reported by :func:`qhom.correlations.verify_qns`.
    """

    def __init__(self, message: str, residuals: dict[str, float] | None = None) -> None:
        super().__init__(message)
        self.residuals = dict(residuals or {})


class WitnessError(QhomError):
    """Raised when a type witness violates its invariants."""


class NoKernelCoverError(QhomError):
    """Raised when an operator subspace has a nonzero common kernel."""


class TroClosureError(QhomError):
    """Raised when TRO generation fails to stabilise within its iteration cap."""


class InputError(QhomError):
    """Raised when an input file cannot be read or fails schema validation.

    Parameters
    ----------
    message:
        Summary of the failure.
    diagnostics:
        One entry per offending field, formatted ``"<path>: <message>"``.
    """

    def __init__(self, message: str, diagnostics: list[str] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)
