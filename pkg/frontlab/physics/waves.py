"""Eigenstructure, wave curves and the exact Riemann solver.

Families 1 and 3 are genuinely nonlinear and parametrized by the shift of
their own characteristic speed, ``lambda_i(T_i(sigma)(u0)) = lambda_i(u0) + sigma``;
``sigma < 0`` selects the entropy shock branch and ``sigma > 0`` the
rarefaction branch. Family 2 is linearly degenerate and parametrized by arc
length. The curves are composed as ``u_R = T3(s3) o T2(s2) o T1(s1)(u_L)``.

Curve evaluations on raw coordinates are memoized; the caches are keyed by
value types only, so callers never observe them.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from frontlab.errors import CurveExitError, DomainError, RiemannSolverError, UsageError
from frontlab.models import CONTACT, RAREFACTION, SHOCK, GasParameters, State, StateBox, as_vector
from frontlab.physics.gas import complete_thermo, flux, internal_energy_from

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Numerical constants
# ---------------------------------------------------------------------------

#: Largest parameter increment per continuation step on a shock curve.
HUGONIOT_STEP: float = 0.05
HUGONIOT_TOL: float = 1e-14
ODE_RTOL: float = 1e-12
ODE_ATOL: float = 1e-13
#: Parameters below this magnitude are treated as the curve origin.
SIGMA_FLOOR: float = 1e-14
#: Waves of the fan weaker than this are reported as absent.
ZERO_WAVE: float = 1e-10

RIEMANN_TOL: float = 1e-11
RIEMANN_MAX_ITER: int = 100
_FD_STEP: float = 1e-7
_CACHE_SIZE: int = 1 << 16


# ---------------------------------------------------------------------------
# Eigenstructure
# ---------------------------------------------------------------------------


def _primitives(vec: np.ndarray, gas: GasParameters) -> tuple[float, float, float, float]:
    """Return ``(tau, w, p, c)`` for a raw state vector."""
    tau, w, energy = float(vec[0]), float(vec[1]), float(vec[2])
    internal = energy - 0.5 * w * w
    if tau <= 0.0:
        raise DomainError("specific volume must be positive", field="tau")
    if internal <= 0.0:
        raise DomainError("internal energy must be positive", field="internal_energy")
    p = (gas.gamma - 1.0) * internal / tau
    return tau, w, p, math.sqrt(gas.gamma * p / tau)


def _eigenvector(vec: np.ndarray, family: int, gas: GasParameters) -> np.ndarray:
    tau, w, p, c = _primitives(vec, gas)
    g = gas.gamma
    if family == 1:
        beta = 2.0 * tau / ((g + 1.0) * c)
        return beta * np.array([1.0, c, w * c - p])
    if family == 3:
        beta = -2.0 * tau / ((g + 1.0) * c)
        return beta * np.array([1.0, -c, -w * c - p])
    if family == 2:
        k = p / (g - 1.0)
        return np.array([1.0, 0.0, k]) / math.sqrt(1.0 + k * k)
    raise UsageError(f"family must be 1, 2 or 3, got {family}")


def characteristic_speed(u: State | np.ndarray, family: int, gas: GasParameters) -> float:
    """``lambda_1 = -c``, ``lambda_2 = 0``, ``lambda_3 = c``."""
    _, _, _, c = _primitives(as_vector(u), gas)
    if family == 1:
        return -c
    if family == 2:
        return 0.0
    if family == 3:
        return c
    raise UsageError(f"family must be 1, 2 or 3, got {family}")


def jacobian(u: State | np.ndarray, gas: GasParameters) -> np.ndarray:
    """Flux Jacobian ``Df`` in conserved variables."""
    tau, w, p, _ = _primitives(as_vector(u), gas)
    g1 = gas.gamma - 1.0
    p_tau, p_w, p_e = -p / tau, -g1 * w / tau, g1 / tau
    return np.array(
        [
            [0.0, -1.0, 0.0],
            [p_tau, p_w, p_e],
            [w * p_tau, p + w * p_w, w * p_e],
        ]
    )


def lambda_gradient(u: State | np.ndarray, family: int, gas: GasParameters) -> np.ndarray:
    """Gradient of ``lambda_family`` in conserved variables."""
    tau, w, _, c = _primitives(as_vector(u), gas)
    if family == 2:
        return np.zeros(3)
    g = gas.gamma
    grad_c = np.array(
        [
            -c / tau,
            -g * (g - 1.0) * w / (2.0 * c * tau * tau),
            g * (g - 1.0) / (2.0 * c * tau * tau),
        ]
    )
    if family == 1:
        return -grad_c
    if family == 3:
        return grad_c
    raise UsageError(f"family must be 1, 2 or 3, got {family}")


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues and right eigenvectors (as columns) of ``Df``.

    Families 1 and 3 are scaled so that ``r_i . grad lambda_i = 1``; the
    family-2 vector has unit length.
    """

    lambdas: tuple[float, float, float]
    r_vectors: np.ndarray

    def r(self, family: int) -> np.ndarray:
        return self.r_vectors[:, family - 1]


def eigen(u: State | np.ndarray, gas: GasParameters) -> EigenSystem:
    vec = as_vector(u)
    _, _, _, c = _primitives(vec, gas)
    columns = np.column_stack([_eigenvector(vec, family, gas) for family in (1, 2, 3)])
    return EigenSystem(lambdas=(-c, 0.0, c), r_vectors=columns)


# ---------------------------------------------------------------------------
# Raw curve evaluations (memoized)
# ---------------------------------------------------------------------------


def _hugoniot_raw(vec0: np.ndarray, family: int, sigma: float, gas: GasParameters) -> tuple[np.ndarray, float]:
    """Point of the Hugoniot locus where ``lambda_family`` has moved by *sigma*.

    Continuation in steps of at most :data:`HUGONIOT_STEP`; at each level the
    closing equation ``e(tau, p) - e0 + (p + p0)(tau - tau0)/2 = 0`` is solved
    on the level set ``lambda(tau, p) = target`` by Newton's method.
    """
    tau0, w0, p0, c0 = _primitives(vec0, gas)
    if abs(sigma) < SIGMA_FLOOR:
        return vec0.copy(), (-c0 if family == 1 else c0)

    e0 = internal_energy_from(tau0, p0, gas)
    orientation = -1.0 if family == 1 else 1.0
    n_steps = max(1, math.ceil(abs(sigma) / HUGONIOT_STEP))
    d_sigma = sigma / n_steps
    d_tau = _eigenvector(vec0, family, gas)[0] * d_sigma
    tau = tau0

    for k in range(1, n_steps + 1):
        c_target = c0 + orientation * k * d_sigma
        if c_target <= 0.0:
            raise CurveExitError(
                "shock curve reaches vanishing sound speed",
                last_valid_sigma=(k - 1) * d_sigma,
            )
        c_sq = c_target * c_target

        def closing(t: float, c_sq: float = c_sq) -> float:
            p = c_sq * t / gas.gamma
            return internal_energy_from(t, p, gas) - e0 + 0.5 * (p + p0) * (t - tau0)

        def closing_prime(t: float, closing=closing) -> float:
            h = 1e-6 * t
            return (closing(t + h) - closing(t - h)) / (2.0 * h)

        root, info = optimize.newton(
            closing,
            tau + d_tau,
            fprime=closing_prime,
            tol=HUGONIOT_TOL,
            maxiter=60,
            full_output=True,
            disp=False,
        )
        if not info.converged or not root > 0.0:
            raise CurveExitError(
                f"Hugoniot closing equation failed at sigma={k * d_sigma:.6g}",
                last_valid_sigma=(k - 1) * d_sigma,
            )
        d_tau = root - tau
        tau = float(root)

    p = c_target * c_target * tau / gas.gamma
    jump_tau = tau - tau0
    if abs(jump_tau) < 1e-15:
        speed = orientation * 0.5 * (c0 + c_target)
    else:
        speed = orientation * math.sqrt(max(-(p - p0) / jump_tau, 0.0))
    w = w0 - speed * jump_tau
    return np.array([tau, w, 0.5 * w * w + internal_energy_from(tau, p, gas)]), speed


def _rarefaction_raw(
    vec0: np.ndarray,
    family: int,
    sigma: float,
    gas: GasParameters,
    t_eval: np.ndarray | None = None,
) -> np.ndarray:
    """Integrate ``u' = r_family(u)`` from 0 to *sigma*; returns the states at *t_eval*."""

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        return _eigenvector(y, family, gas)

    try:
        sol = integrate.solve_ivp(
            rhs,
            (0.0, sigma),
            vec0,
            method="RK45",
            rtol=ODE_RTOL,
            atol=ODE_ATOL,
            t_eval=t_eval,
        )
    except DomainError as exc:
        raise CurveExitError(f"rarefaction curve left the physical domain: {exc}", last_valid_sigma=0.0) from exc
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise CurveExitError(f"rarefaction integration failed: {sol.message}", last_valid_sigma=0.0)
    return sol.y.T


def _contact_raw(vec0: np.ndarray, sigma: float, gas: GasParameters) -> np.ndarray:
    """The contact curve is the straight line through *vec0* along ``r_2``."""
    return vec0 + sigma * _eigenvector(vec0, 2, gas)


@lru_cache(maxsize=_CACHE_SIZE)
def _wave_point_cached(
    key: tuple[float, float, float], family: int, sigma: float, gas: GasParameters, branch: str
) -> tuple[tuple[float, float, float], float]:
    vec0 = np.array(key)
    if family == 2:
        vec, speed = _contact_raw(vec0, sigma, gas), 0.0
    elif branch == "hugoniot" or sigma < 0.0:
        vec, speed = _hugoniot_raw(vec0, family, sigma, gas)
    elif sigma == 0.0:
        vec, speed = vec0, characteristic_speed(vec0, family, gas)
    else:
        vec = _rarefaction_raw(vec0, family, sigma, gas)[-1]
        speed = characteristic_speed(vec, family, gas)
    return (float(vec[0]), float(vec[1]), float(vec[2])), float(speed)


def _wave_point(
    vec0: np.ndarray, family: int, sigma: float, gas: GasParameters, branch: str = "admissible"
) -> tuple[np.ndarray, float]:
    key = (float(vec0[0]), float(vec0[1]), float(vec0[2]))
    values, speed = _wave_point_cached(key, family, float(sigma), gas, branch)
    vec = np.array(values)
    _primitives(vec, gas)
    return vec, speed


# ---------------------------------------------------------------------------
# Public curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveCurvePoint:
    """A point ``T_i(sigma)(u0)`` with its propagation speed.

    Attributes:
        state: The point on the curve.
        sigma: Curve parameter.
        speed: Rankine-Hugoniot speed (shocks), 0 (contacts) or the
            characteristic speed at the point (rarefactions).
        family: Characteristic family.
        kind: ``shock``, ``rarefaction_step``, ``contact`` or ``None`` at the origin.
    """

    state: State
    sigma: float
    speed: float
    family: int
    kind: str | None

    def to_dict(self) -> dict:
        return {
            "state": self.state.to_dict(),
            "sigma": self.sigma,
            "speed": self.speed,
            "family": self.family,
            "kind": self.kind,
        }


def _last_valid(
    vec0: np.ndarray, family: int, sigma: float, gas: GasParameters, box: StateBox | None, branch: str
) -> float:
    """Largest sampled parameter, in steps of sigma/20, that stays admissible."""
    last = 0.0
    for k in range(1, 21):
        trial = sigma * k / 20.0
        try:
            vec, _ = _wave_point(vec0, family, trial, gas, branch)
        except (CurveExitError, DomainError):
            break
        if box is not None and not box.contains(vec):
            break
        last = trial
    return last


def _finish(
    u0: State,
    family: int,
    sigma: float,
    gas: GasParameters,
    box: StateBox | None,
    branch: str,
    kind: str | None,
) -> WaveCurvePoint:
    vec0 = u0.as_array()
    try:
        vec, speed = _wave_point(vec0, family, sigma, gas, branch)
    except (CurveExitError, DomainError) as exc:
        raise CurveExitError(
            f"family-{family} curve left the physical domain at sigma={sigma:.6g}: {exc}",
            last_valid_sigma=_last_valid(vec0, family, sigma, gas, box, branch),
        ) from exc
    if box is not None and not box.contains(vec):
        raise CurveExitError(
            f"family-{family} curve left the working box at sigma={sigma:.6g}",
            last_valid_sigma=_last_valid(vec0, family, sigma, gas, box, branch),
        )
    return WaveCurvePoint(State.from_array(vec), sigma, speed, family, kind if sigma != 0.0 else None)


def _require_gnl(family: int) -> None:
    if family not in (1, 3):
        raise UsageError(f"genuinely nonlinear family expected (1 or 3), got {family}")


def shock_curve(
    u0: State, family: int, sigma: float, gas: GasParameters, box: StateBox | None = None
) -> WaveCurvePoint:
    """Entropy shock curve ``S_i(sigma)(u0)`` for ``sigma <= 0``.

    Raises:
        UsageError: If ``sigma > 0`` or the family is not 1 or 3.
        CurveExitError: If the curve leaves the box before reaching *sigma*.
    """
    _require_gnl(family)
    if sigma > 0.0:
        raise UsageError(f"shock curves need sigma <= 0, got {sigma}")
    return _finish(u0, family, sigma, gas, box, "hugoniot", SHOCK)


def hugoniot_point(
    u0: State, family: int, sigma: float, gas: GasParameters, box: StateBox | None = None
) -> WaveCurvePoint:
    """Point of the full Hugoniot locus, both branches (``sigma`` of either sign)."""
    _require_gnl(family)
    return _finish(u0, family, sigma, gas, box, "hugoniot", SHOCK)


def rarefaction_curve(
    u0: State, family: int, sigma: float, gas: GasParameters, box: StateBox | None = None
) -> WaveCurvePoint:
    """Integral curve ``R_i(sigma)(u0)`` of ``r_i`` for ``sigma >= 0``."""
    _require_gnl(family)
    if sigma < 0.0:
        raise UsageError(f"rarefaction curves need sigma >= 0, got {sigma}")
    return _finish(u0, family, sigma, gas, box, "admissible", RAREFACTION)


def contact_curve(u0: State, sigma: float, gas: GasParameters, box: StateBox | None = None) -> WaveCurvePoint:
    """Contact curve through *u0*, parametrized by arc length; pressure and velocity fixed."""
    return _finish(u0, 2, sigma, gas, box, "admissible", CONTACT)


def wave_curve(
    u0: State, family: int, sigma: float, gas: GasParameters, box: StateBox | None = None
) -> WaveCurvePoint:
    """Admissible curve ``T_i``: shock for ``sigma < 0``, rarefaction for ``sigma > 0``."""
    if family == 2:
        return contact_curve(u0, sigma, gas, box)
    if sigma < 0.0:
        return shock_curve(u0, family, sigma, gas, box)
    return rarefaction_curve(u0, family, sigma, gas, box)


def rarefaction_steps(u0: State, family: int, sigma: float, n: int, gas: GasParameters) -> list[State]:
    """States ``R_i(k sigma / n)(u0)`` for ``k = 0..n`` from a single integration."""
    _require_gnl(family)
    if sigma <= 0.0 or n < 1:
        raise UsageError("rarefaction steps need sigma > 0 and n >= 1")
    t_eval = np.linspace(0.0, sigma, n + 1)
    rows = _rarefaction_raw(u0.as_array(), family, sigma, gas, t_eval=t_eval)
    return [u0, *(State.from_array(row) for row in rows[1:])]


def sample_curve(
    u0: State, family: int, sigmas: Sequence[float], gas: GasParameters, box: StateBox | None = None
) -> list[WaveCurvePoint]:
    """Evaluate the admissible curve of *family* at each parameter in *sigmas*."""
    return [wave_curve(u0, family, float(s), gas, box) for s in sigmas]


# ---------------------------------------------------------------------------
# Jump diagnostics
# ---------------------------------------------------------------------------


def rh_residual(u_left: State, u_right: State, speed: float, gas: GasParameters) -> float:
    """``max |f(u_R) - f(u_L) - s (u_R - u_L)|``."""
    jump = u_right.as_array() - u_left.as_array()
    return float(np.max(np.abs(flux(u_right, gas) - flux(u_left, gas) - speed * jump)))


def lax_admissible(u_left: State, u_right: State, family: int, speed: float, gas: GasParameters) -> bool:
    """Lax condition ``lambda_i(u_R) < s < lambda_i(u_L)``."""
    return characteristic_speed(u_right, family, gas) < speed < characteristic_speed(u_left, family, gas)


def entropy_jump(u_left: State, u_right: State, gas: GasParameters) -> float:
    """Physical entropy difference ``S(u_R) - S(u_L)``."""
    return complete_thermo(u_right, gas).entropy - complete_thermo(u_left, gas).entropy


# ---------------------------------------------------------------------------
# Riemann solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiemannFan:
    """Exact solution of a Riemann problem as three waves.

    Attributes:
        left_state: ``u_L``.
        right_state: ``u_R``.
        sigmas: ``(sigma_1, sigma_2, sigma_3)``.
        middle_states: States after the 1-wave and after the 2-wave.
        wave_kinds: Kind per family, ``None`` for absent waves.
        speeds: ``(lowest, highest)`` speed per family; equal for shocks and contacts.
        residual: Max-norm composition residual.
        iterations: Iterations used by the root solve.
    """

    left_state: State
    right_state: State
    sigmas: tuple[float, float, float]
    middle_states: tuple[State, State]
    wave_kinds: tuple[str | None, str | None, str | None]
    speeds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    residual: float
    iterations: int

    def states(self) -> tuple[State, State, State, State]:
        return (self.left_state, *self.middle_states, self.right_state)

    def waves(self) -> list[dict]:
        """Present waves, left to right."""
        states = self.states()
        out = []
        for k, family in enumerate((1, 2, 3)):
            if self.wave_kinds[k] is None:
                continue
            out.append(
                {
                    "family": family,
                    "kind": self.wave_kinds[k],
                    "sigma": self.sigmas[k],
                    "left_state": states[k],
                    "right_state": states[k + 1],
                    "speed_low": self.speeds[k][0],
                    "speed_high": self.speeds[k][1],
                }
            )
        return out

    def to_dict(self) -> dict:
        return {
            "left_state": self.left_state.to_dict(),
            "right_state": self.right_state.to_dict(),
            "sigmas": list(self.sigmas),
            "middle_states": [s.to_dict() for s in self.middle_states],
            "wave_kinds": list(self.wave_kinds),
            "speeds": [list(pair) for pair in self.speeds],
            "residual": self.residual,
            "iterations": self.iterations,
        }


def _compose(vec_left: np.ndarray, sigmas: np.ndarray, gas: GasParameters) -> list[tuple[np.ndarray, float]]:
    out = []
    vec = vec_left
    for family, sigma in zip((1, 2, 3), sigmas):
        vec, speed = _wave_point(vec, family, float(sigma), gas)
        out.append((vec, speed))
    return out


def compose_waves(u_left: State, sigmas: Sequence[float], gas: GasParameters) -> State:
    """``T3(s3) o T2(s2) o T1(s1)(u_L)`` along the admissible curves."""
    return State.from_array(_compose(u_left.as_array(), np.asarray(sigmas, dtype=float), gas)[-1][0])


def _fd_jacobian(residual_fn, sigmas: np.ndarray, base: np.ndarray) -> np.ndarray:
    jac = np.empty((3, 3))
    for j in range(3):
        step = np.zeros(3)
        step[j] = _FD_STEP
        jac[:, j] = (residual_fn(sigmas + step) - base) / _FD_STEP
    return jac


def _broyden_solve(
    residual_fn,
    jac0: np.ndarray,
    *,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Damped Broyden iteration for ``residual_fn(sigmas) = 0`` seeded at zero.

    Falls back to a finite-difference Jacobian when a step cannot reduce
    the residual.
    """
    sigmas = np.zeros(3)
    res = residual_fn(sigmas)
    jac = jac0.copy()
    fresh = False
    for iteration in range(max_iter):
        norm = float(np.max(np.abs(res)))
        if norm <= tol:
            return sigmas, res, iteration
        try:
            step = -np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(jac, res, rcond=None)[0]

        damping = 1.0
        accepted = None
        while damping >= 1.0 / 64.0:
            trial = sigmas + damping * step
            try:
                trial_res = residual_fn(trial)
            except (CurveExitError, DomainError):
                damping *= 0.5
                continue
            if float(np.max(np.abs(trial_res))) < (1.0 - 1e-4 * damping) * norm:
                accepted = (trial, trial_res)
                break
            damping *= 0.5

        if accepted is None:
            if fresh:
                return sigmas, res, iteration
            jac = _fd_jacobian(residual_fn, sigmas, res)
            fresh = True
            continue

        trial, trial_res = accepted
        s = trial - sigmas
        y = trial_res - res
        jac = jac + np.outer(y - jac @ s, s) / float(s @ s)
        sigmas, res = trial, trial_res
        fresh = False
    return sigmas, res, max_iter


@lru_cache(maxsize=4096)
def _solve_riemann_cached(
    left: tuple[float, float, float], right: tuple[float, float, float], gas: GasParameters
) -> tuple[np.ndarray, int, float]:
    vec_left, vec_right = np.array(left), np.array(right)

    def residual_fn(sigmas: np.ndarray) -> np.ndarray:
        return _compose(vec_left, sigmas, gas)[-1][0] - vec_right

    sigmas, res, iterations = _broyden_solve(
        residual_fn, eigen(vec_left, gas).r_vectors, tol=RIEMANN_TOL, max_iter=RIEMANN_MAX_ITER
    )
    return sigmas, iterations, float(np.max(np.abs(res)))


def solve_riemann(
    u_left: State, u_right: State, gas: GasParameters, box: StateBox | None = None
) -> RiemannFan:
    """Solve the Riemann problem ``(u_L, u_R)`` exactly.

    Raises:
        RiemannSolverError: If the states are farther apart than the box's
            solvability threshold or the iteration does not converge.
    """
    if box is not None:
        box.require(u_left, "left state")
        box.require(u_right, "right state")
        distance = box.distance(u_left, u_right)
        if distance > box.solvability_threshold:
            raise RiemannSolverError(
                f"states are {distance:.3g} apart in box units, above the solvability "
                f"threshold {box.solvability_threshold}",
                residual=distance,
                iterations=0,
            )

    sigmas, iterations, residual = _solve_riemann_cached(
        tuple(u_left.as_array().tolist()), tuple(u_right.as_array().tolist()), gas
    )
    if not residual <= 1e-9:
        raise RiemannSolverError(
            f"Riemann iteration stalled with residual {residual:.3e} after {iterations} iterations",
            residual=residual,
            iterations=iterations,
        )

    points = _compose(u_left.as_array(), sigmas, gas)
    middle = (State.from_array(points[0][0]), State.from_array(points[1][0]))
    states = (u_left, *middle, u_right)
    kinds: list[str | None] = []
    speeds: list[tuple[float, float]] = []
    for k, family in enumerate((1, 2, 3)):
        sigma = float(sigmas[k])
        if abs(sigma) <= ZERO_WAVE:
            kinds.append(None)
        elif family == 2:
            kinds.append(CONTACT)
        elif sigma < 0.0:
            kinds.append(SHOCK)
        else:
            kinds.append(RAREFACTION)
        if kinds[-1] == RAREFACTION:
            speeds.append(
                (
                    characteristic_speed(states[k], family, gas),
                    characteristic_speed(states[k + 1], family, gas),
                )
            )
        else:
            speeds.append((points[k][1], points[k][1]))

    logger.debug("Riemann solve: sigmas=%s in %d iterations", sigmas.tolist(), iterations)
    return RiemannFan(
        left_state=u_left,
        right_state=u_right,
        sigmas=(float(sigmas[0]), float(sigmas[1]), float(sigmas[2])),
        middle_states=middle,
        wave_kinds=(kinds[0], kinds[1], kinds[2]),
        speeds=(speeds[0], speeds[1], speeds[2]),
        residual=residual,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Hugoniot coordinates
# ---------------------------------------------------------------------------


def _compose_hugoniot(vec_left: np.ndarray, sigmas: np.ndarray, gas: GasParameters) -> np.ndarray:
    vec = vec_left
    for family, sigma in zip((1, 2, 3), sigmas):
        vec, _ = _wave_point(vec, family, float(sigma), gas, "hugoniot")
    return vec


@lru_cache(maxsize=_CACHE_SIZE)
def _hugoniot_coordinates_cached(
    left: tuple[float, float, float], right: tuple[float, float, float], gas: GasParameters
) -> tuple[tuple[float, float, float], int, float]:
    vec_left, vec_right = np.array(left), np.array(right)

    def residual_fn(sigmas: np.ndarray) -> np.ndarray:
        return _compose_hugoniot(vec_left, sigmas, gas) - vec_right

    sigmas, res, iterations = _broyden_solve(
        residual_fn, eigen(vec_left, gas).r_vectors, tol=RIEMANN_TOL, max_iter=RIEMANN_MAX_ITER
    )
    return (float(sigmas[0]), float(sigmas[1]), float(sigmas[2])), iterations, float(np.max(np.abs(res)))


def hugoniot_coordinates(u: State, v: State, gas: GasParameters) -> tuple[np.ndarray, float]:
    """Parameters ``q`` with ``v = S3(q3) o S2(q2) o S1(q1)(u)`` on the full Hugoniot loci.

    Returns:
        ``(q, residual)``.

    Raises:
        RiemannSolverError: If the iteration does not reach ``v``.
    """
    if u == v:
        return np.zeros(3), 0.0
    sigmas, iterations, residual = _hugoniot_coordinates_cached(
        tuple(u.as_array().tolist()), tuple(v.as_array().tolist()), gas
    )
    if not residual <= 1e-9:
        raise RiemannSolverError(
            f"Hugoniot decomposition stalled with residual {residual:.3e}",
            residual=residual,
            iterations=iterations,
        )
    return np.array(sigmas), residual
