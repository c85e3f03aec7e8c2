"""Approximate Riemann solvers of the front-tracking scheme and initial discretization.

Both solvers return fronts with unassigned ids (``-1``) and the natural
speeds of their waves; the tracker assigns ids, applies the speed jitter
and any shift policy.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from frontlab.models import (
    CONTACT,
    NON_PHYSICAL,
    NP_FAMILY,
    RAREFACTION,
    SHOCK,
    Front,
    GasParameters,
    Profile,
    State,
    StateBox,
)
from frontlab.physics.waves import (
    ZERO_WAVE,
    characteristic_speed,
    rarefaction_steps,
    solve_riemann,
    wave_curve,
)

logger = logging.getLogger(__name__)

#: Residual jumps below this size are absorbed instead of becoming non-physical fronts.
NP_FLOOR: float = 1e-13
_BISECTION_STEPS: int = 60


def _jump(u_left: State, u_right: State) -> float:
    return float(np.max(np.abs(u_right.as_array() - u_left.as_array())))


def _wave_fronts(
    u_left: State,
    family: int,
    sigma: float,
    right: State,
    nu: float | None,
    speed: float,
    gas: GasParameters,
    position: float,
) -> list[Front]:
    """Fronts for one wave ``u_left -> right`` of the given family.

    Rarefactions are split into ``ceil(sigma / nu)`` steps when *nu* is
    given; each step moves at the characteristic speed of its left state.
    """
    if family == 2:
        return [Front(-1, position, 0.0, 2, CONTACT, u_left, right, sigma)]
    if sigma < 0.0:
        return [Front(-1, position, speed, family, SHOCK, u_left, right, sigma)]
    n = 1 if nu is None else max(1, math.ceil(sigma / nu - 1e-9))
    states = [u_left, right] if n == 1 else rarefaction_steps(u_left, family, sigma, n, gas)
    states[-1] = right
    return [
        Front(
            -1,
            position,
            characteristic_speed(states[k], family, gas),
            family,
            RAREFACTION,
            states[k],
            states[k + 1],
            sigma / n,
        )
        for k in range(n)
    ]


# ---------------------------------------------------------------------------
# Accurate solver
# ---------------------------------------------------------------------------


def accurate_solver(
    u_left: State,
    u_right: State,
    nu: float,
    gas: GasParameters,
    *,
    box: StateBox | None = None,
    position: float = 0.0,
) -> list[Front]:
    """Exact fan of ``(u_L, u_R)`` with rarefactions split into steps of strength <= *nu*."""
    if _jump(u_left, u_right) == 0.0:
        return []
    fan = solve_riemann(u_left, u_right, gas, box)
    waves = fan.waves()
    if not waves:
        # Every wave fell under ZERO_WAVE; keep the chain with the dominant one.
        k = int(np.argmax(np.abs(fan.sigmas)))
        family = k + 1
        waves = [
            {
                "family": family,
                "sigma": fan.sigmas[k],
                "right_state": u_right,
                "speed_low": characteristic_speed(u_left, family, gas),
            }
        ]

    fronts: list[Front] = []
    current = u_left
    for index, wave in enumerate(waves):
        right = u_right if index == len(waves) - 1 else wave["right_state"]
        fronts.extend(
            _wave_fronts(current, wave["family"], wave["sigma"], right, nu, wave["speed_low"], gas, position)
        )
        current = right
    return fronts


# ---------------------------------------------------------------------------
# Simplified solver
# ---------------------------------------------------------------------------


def simplified_solver(
    u_left: State,
    u_right: State,
    incoming: Sequence[Front],
    lambda_hat: float,
    gas: GasParameters,
    *,
    nu: float | None = None,
    position: float = 0.0,
) -> list[Front]:
    """Transmit the incoming physical waves and collect the residual in one non-physical front.

    Waves of different families cross with unchanged strengths, waves of
    the same family merge. A merged rarefaction stronger than *nu* is split
    into steps like any other. The state reached by composing the waves from
    *u_left* generally misses *u_right*; that residual jump travels at *lambda_hat*.
    """
    physical = sorted((f for f in incoming if f.is_physical), key=lambda f: f.family)
    plan: list[tuple[int, float]] = []
    for front in physical:
        if plan and plan[-1][0] == front.family:
            plan[-1] = (front.family, plan[-1][1] + front.sigma)
        else:
            plan.append((front.family, front.sigma))

    fronts: list[Front] = []
    current = u_left
    for family, sigma in plan:
        if abs(sigma) <= ZERO_WAVE:
            continue
        point = wave_curve(current, family, sigma, gas)
        fronts.extend(_wave_fronts(current, family, sigma, point.state, nu, point.speed, gas, position))
        current = point.state

    residual = _jump(current, u_right)
    if residual > NP_FLOOR:
        size = float(np.linalg.norm(u_right.as_array() - current.as_array()))
        fronts.append(Front(-1, position, lambda_hat, NP_FAMILY, NON_PHYSICAL, current, u_right, size))
    elif fronts:
        last = fronts[-1]
        fronts[-1] = Front(-1, position, last.speed, last.family, last.kind, last.left_state, u_right, last.sigma)
    elif residual > 0.0:
        size = float(np.linalg.norm(u_right.as_array() - current.as_array()))
        fronts.append(Front(-1, position, lambda_hat, NP_FAMILY, NON_PHYSICAL, current, u_right, size))
    return fronts


# ---------------------------------------------------------------------------
# Initial discretization
# ---------------------------------------------------------------------------


def _locate_jump(data: Callable[[float], State], cell: np.ndarray, lo: float, hi: float, nu: float) -> float:
    """Bisect for the first point in ``(lo, hi]`` where *data* leaves the nu-ball of *cell*."""
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.max(np.abs(data(mid).as_array() - cell)) > nu:
            hi = mid
        else:
            lo = mid
    return hi


def discretize_initial(
    data: Callable[[float], State],
    box: StateBox,
    nu: float,
    gas: GasParameters,
    *,
    interval: tuple[float, float] | None = None,
    n_samples: int = 2001,
) -> Profile:
    """Piecewise-constant approximation of *data* within *nu* in the max-norm.

    A new cell starts wherever the data leave the nu-ball around the
    current cell value; cell values are data values, so the total variation
    does not grow. Every jump is resolved into fronts by :func:`accurate_solver`.

    Raises:
        DomainError: If a sampled value lies outside *box*.
    """
    a, b = interval if interval is not None else getattr(data, "interval", (-1.0, 1.0))
    xs = np.linspace(a, b, n_samples)
    breakpoints = [x for x in getattr(data, "breakpoints", ()) if a < x < b]
    if breakpoints:
        xs = np.unique(np.concatenate([xs, breakpoints]))
    exact_jumps = set(breakpoints)

    first = data(float(xs[0]))
    box.require(first, f"initial value at x={xs[0]:.6g}")
    cell = first.as_array()
    cell_state = first
    jumps: list[tuple[float, State, State]] = []
    previous_x = float(xs[0])
    for x in xs[1:]:
        x = float(x)
        value = data(x)
        box.require(value, f"initial value at x={x:.6g}")
        lo = previous_x
        while np.max(np.abs(value.as_array() - cell)) > nu:
            where = _locate_jump(data, cell, lo, x, nu)
            new_state = data(where)
            box.require(new_state, f"initial value at x={where:.6g}")
            jumps.append((where, cell_state, new_state))
            cell_state, cell = new_state, new_state.as_array()
            lo = where
        if x in exact_jumps and value != cell_state:
            # Jumps of piecewise-constant data are kept even when weaker than nu.
            jumps.append((x, cell_state, value))
            cell_state, cell = value, value.as_array()
        previous_x = x

    fronts: list[Front] = []
    for where, left, right in jumps:
        fronts.extend(accurate_solver(left, right, nu, gas, box=box, position=where))
    profile = Profile(time=0.0, leftmost_state=first, fronts=tuple(fronts))
    logger.debug("discretized data into %d cells, %d fronts", len(jumps) + 1, len(fronts))
    return profile


def in_small_bv_class(profile: Profile, reference: State, epsilon: float) -> bool:
    """``TV <= epsilon`` and every value within *epsilon* of *reference* (max-norm)."""
    if profile.total_variation() > epsilon:
        return False
    base = reference.as_array()
    return all(float(np.max(np.abs(s.as_array() - base))) <= epsilon for s in profile.states())
