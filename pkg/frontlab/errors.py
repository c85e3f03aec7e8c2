"""frontlab exception hierarchy.

Every error raised on purpose by the library derives from
:class:`FrontlabError` and carries the process exit code the CLI maps it
to: ``1`` for a failed invariant, ``2`` for usage, configuration or
domain errors, and ``3`` for solver failures.
"""

from __future__ import annotations


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------

EXIT_OK: int = 0
EXIT_INVARIANT: int = 1
EXIT_USAGE: int = 2
EXIT_SOLVER: int = 3


# ---------------------------------------------------------------------------
# Base
# ---------------------------------------------------------------------------


class FrontlabError(Exception):
    """Base class for all frontlab errors."""

    exit_code: int = EXIT_INVARIANT

    def to_dict(self) -> dict:
        """Return a JSON-serializable description of the error."""
        return {"error": type(self).__name__, "message": str(self)}

    def __reduce__(self):
        # Keeps keyword attributes across process boundaries (--jobs).
        return (type(self), (str(self),), self.__dict__)


class InvariantViolation(FrontlabError):
    """A checked invariant of an audit or a functional failed."""

    exit_code = EXIT_INVARIANT


# ---------------------------------------------------------------------------
# Usage / configuration / domain
# ---------------------------------------------------------------------------


class UsageError(FrontlabError, ValueError):
    """An operation was called outside its contract (wrong sign, wrong kind)."""

    exit_code = EXIT_USAGE


class ConfigurationError(FrontlabError, ValueError):
    """The run configuration could not be loaded or validated."""

    exit_code = EXIT_USAGE


class DomainError(FrontlabError, ValueError):
    """A state left the physical domain or the working box.

    Attributes:
        field: Name of the offending quantity (``"tau"``, ``"internal_energy"``,
            ``"box"`` ...).
    """

    exit_code = EXIT_USAGE

    def __init__(self, message: str, field: str = "state") -> None:
        super().__init__(message)
        self.field = field

    def to_dict(self) -> dict:
        return {**super().to_dict(), "field": self.field}


# ---------------------------------------------------------------------------
# Solver failures
# ---------------------------------------------------------------------------


class SolverError(FrontlabError):
    """Base class for numerical solver failures."""

    exit_code = EXIT_SOLVER


class CurveExitError(SolverError, ArithmeticError):
    """A wave curve left the working box or the physical domain.

    Attributes:
        last_valid_sigma: Largest parameter (in absolute value) for which the
            curve was still admissible.
    """

    def __init__(self, message: str, last_valid_sigma: float = 0.0) -> None:
        super().__init__(message)
        self.last_valid_sigma = last_valid_sigma

    def to_dict(self) -> dict:
        return {**super().to_dict(), "last_valid_sigma": self.last_valid_sigma}


class RiemannSolverError(SolverError, ArithmeticError):
    """The Riemann iteration did not converge or the data were not solvable."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

    def to_dict(self) -> dict:
        return {
            **super().to_dict(),
            "residual": self.residual,
            "iterations": self.iterations,
        }


class InteractionCapExceeded(SolverError, RuntimeError):
    """The tracker processed more interactions than its hard cap allows."""

    def __init__(self, message: str, cap: int = 0, time: float = 0.0) -> None:
        super().__init__(message)
        self.cap = cap
        self.time = time

    def to_dict(self) -> dict:
        return {**super().to_dict(), "cap": self.cap, "time": self.time}


# ---------------------------------------------------------------------------
# Stage wrapper
# ---------------------------------------------------------------------------


class StageError(FrontlabError):
    """A named stage of a composed experiment failed.

    The exit code is inherited from the underlying cause so that a solver
    failure inside a stage still maps to ``3``.
    """

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", EXIT_INVARIANT)

    def __reduce__(self):
        return (type(self), (self.stage, self.cause), self.__dict__)

    def to_dict(self) -> dict:
        cause = (
            self.cause.to_dict()
            if isinstance(self.cause, FrontlabError)
            else {"error": type(self.cause).__name__, "message": str(self.cause)}
        )
        return {**super().to_dict(), "stage": self.stage, "cause": cause}
