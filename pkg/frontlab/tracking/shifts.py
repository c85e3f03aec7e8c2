"""Shift policies: the speeds imposed on shock fronts of a shifted run.

A policy is consulted whenever a shock front is born and, for policies
with ``re_evaluate = True``, again at every interaction and refresh time of
the run. Contacts, rarefaction steps and non-physical fronts are never
shifted. Shifted speeds of 1-shocks stay in ``[-lambda_hat/2, -alpha]`` and
those of 3-shocks in ``[alpha, lambda_hat/2]``.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import Protocol

from frontlab.errors import UsageError
from frontlab.models import SHOCK, Front, GasParameters, State, StateBox
from frontlab.physics.gas import relative_entropy, relative_flux, sound_speed_bounds

logger = logging.getLogger(__name__)


class TraceSource(Protocol):
    """Anything that can report one-sided traces ``(u(x-, t), u(x+, t))``."""

    def traces(self, x: float, t: float) -> tuple[State, State]: ...


# ---------------------------------------------------------------------------
# Window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftWindow:
    """Admissible range of shifted shock speeds.

    Attributes:
        lambda_hat: Speed of non-physical fronts.
        alpha: Minimum distance of a shifted speed from zero.
    """

    lambda_hat: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 0.5 * self.lambda_hat:
            raise UsageError(f"need 0 < alpha < lambda_hat/2, got alpha={self.alpha}, lambda_hat={self.lambda_hat}")

    @classmethod
    def for_box(cls, box: StateBox, gas: GasParameters, lambda_hat: float, alpha: float | None = None) -> ShiftWindow:
        """Default ``alpha``: half the smallest characteristic speed magnitude in the box."""
        c_min, _ = sound_speed_bounds(box, gas)
        return cls(lambda_hat=lambda_hat, alpha=0.5 * c_min if alpha is None else alpha)

    def bounds(self, family: int) -> tuple[float, float]:
        if family == 1:
            return -0.5 * self.lambda_hat, -self.alpha
        if family == 3:
            return self.alpha, 0.5 * self.lambda_hat
        raise UsageError(f"only 1- and 3-shocks have shift windows, got family {family}")

    def clip(self, family: int, speed: float) -> float:
        lo, hi = self.bounds(family)
        return min(max(speed, lo), hi)

    def contains(self, family: int, speed: float, tol: float = 1e-12) -> bool:
        lo, hi = self.bounds(family)
        return lo - tol <= speed <= hi + tol

    def to_dict(self) -> dict:
        return {"lambda_hat": self.lambda_hat, "alpha": self.alpha}


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class ShiftPolicy(ABC):
    """Interface of a shift policy.

    ``imposed_speed`` receives a shock front whose ``speed`` is its
    Rankine-Hugoniot speed, the time, and the deterministic jitter the
    tracker assigned to that front.
    """

    name: str = "abstract"
    re_evaluate: bool = False
    refresh_dt: float | None = None
    window: ShiftWindow | None = None

    def applies_to(self, front: Front) -> bool:
        return front.kind == SHOCK

    @abstractmethod
    def imposed_speed(self, front: Front, t: float, jitter: float) -> float: ...

    def to_dict(self) -> dict:
        return {
            "policy": self.name,
            "window": None if self.window is None else self.window.to_dict(),
            "refresh_dt": self.refresh_dt,
        }


class ConstantOffset(ShiftPolicy):
    """``h' = lambda_s + c``, clipped to the window."""

    name = "constant_offset"

    def __init__(self, offset: float, window: ShiftWindow, *, front_ids: frozenset[int] | None = None) -> None:
        self.offset = offset
        self.window = window
        self.front_ids = front_ids

    def applies_to(self, front: Front) -> bool:
        if self.front_ids is not None and front.id not in self.front_ids:
            return False
        return super().applies_to(front)

    def imposed_speed(self, front: Front, t: float, jitter: float) -> float:
        return self.window.clip(front.family, front.speed + self.offset + jitter)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "offset": self.offset}


SpeedRule = Callable[[Front, State, State, GasParameters], float]


def dissipation_terms(
    front: Front, u_minus: State, u_plus: State, gas: GasParameters, weights: tuple[float, float] = (1.0, 1.0)
) -> tuple[float, float]:
    """``(A, B)`` with ``D(h') = A - h' B`` for the traces at *front*."""
    a_left, a_right = weights
    a = a_right * relative_flux(u_plus, front.right_state, gas) - a_left * relative_flux(u_minus, front.left_state, gas)
    b = a_right * relative_entropy(u_plus, front.right_state, gas) - a_left * relative_entropy(
        u_minus, front.left_state, gas
    )
    return float(a), float(b)


@dataclass(frozen=True)
class DissipationDescentRule:
    """Speed ``lambda_s + B / (gain * s0)`` where ``D(h') = A - h' B``.

    With this choice ``D(h') = D(lambda_s) - gain * s0 * (h' - lambda_s)**2``,
    so the shifted dissipation is at most the unshifted one minus the
    quadratic shift penalty.
    """

    gain: float = 1.0

    def __call__(self, front: Front, u_minus: State, u_plus: State, gas: GasParameters) -> float:
        _, b = dissipation_terms(front, u_minus, u_plus, gas)
        s0 = front.jump
        if s0 == 0.0:
            return front.speed
        return front.speed + b / (self.gain * s0)


class TraceDriven(ShiftPolicy):
    """Speeds computed from the traces of a reference solution at the front position."""

    name = "trace_driven"
    re_evaluate = True

    def __init__(
        self,
        reference: TraceSource,
        window: ShiftWindow,
        gas: GasParameters,
        *,
        rule: SpeedRule | None = None,
        refresh_dt: float | None = None,
    ) -> None:
        self.reference = reference
        self.window = window
        self.gas = gas
        self.rule = rule if rule is not None else DissipationDescentRule()
        self.refresh_dt = refresh_dt

    def imposed_speed(self, front: Front, t: float, jitter: float) -> float:
        u_minus, u_plus = self.reference.traces(front.position, t)
        return self.window.clip(front.family, self.rule(front, u_minus, u_plus, self.gas) + jitter)

    def to_dict(self) -> dict:
        rule = self.rule
        return {**super().to_dict(), "rule": type(rule).__name__, "gain": getattr(rule, "gain", None)}
