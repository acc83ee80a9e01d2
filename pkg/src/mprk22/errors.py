"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MPRKError(Exception):
    """Base class for every error raised by :mod:`mprk22`."""


class ValidationError(MPRKError, ValueError):
    """Input data violates a structural invariant (shape, sign, conservation)."""


class DomainError(MPRKError, ValueError):
    """A function was evaluated outside its domain (pole, alpha = 0, ...)."""


class StepError(MPRKError, ArithmeticError):
    """A time step could not be completed.

    ``step`` is filled in by :func:`mprk22.core.integrate` with the index of
    the failing step; ``component`` names the offending state index when one
    is known.
    """

    def __init__(self, message: str, *, step: int | None = None,
                 component: int | None = None):
        super().__init__(message)
        self.step = step
        self.component = component

    def __str__(self) -> str:
        msg = super().__str__()
        if self.step is not None:
            msg = f"step {self.step}: {msg}"
        return msg


class SingularMatrixError(StepError):
    """Pivot fell below the singularity threshold during elimination."""


class AssemblyError(StepError):
    """A non-finite term appeared while assembling a Patankar matrix.

    ``provenance`` is the ``(i, j, k)`` triple of the offending term.
    """

    def __init__(self, message: str, *, provenance: tuple[int, int, int]):
        super().__init__(message, component=provenance[0])
        self.provenance = provenance
