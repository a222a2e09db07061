"""Exception types shared across the package."""

from __future__ import annotations


class BerglabError(Exception):
    """Base class for all package-specific failures."""


class DomainError(BerglabError):
    """Input outside the mathematical domain of an operation."""


class QuadratureError(BerglabError):
    """A numerical integral produced NaN/inf or failed a sanity bound.

    Carries enough context to locate the offending mesh region.
    """

    def __init__(self, message: str, *, where: str | None = None) -> None:
        if where:
            message = f"{message} (at {where})"
        super().__init__(message)
        self.where = where


class BracketError(BerglabError):
    """Root bracketing failed: the target is not enclosed by the endpoints."""


class ConvergenceError(BerglabError):
    """An iterative procedure exhausted its budget without converging."""


class CertificationError(BerglabError):
    """A verification routine could not certify the claimed estimate.

    Raised when a check fails honestly, as opposed to a numerical
    breakdown (which raises QuadratureError instead).
    """
