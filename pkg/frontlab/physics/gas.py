"""Thermodynamics of the polytropic gas and the relative entropy machinery.

Conserved variables are ``u = (tau, w, E)`` with ``E = w**2/2 + e`` and the
gamma-law closure ``p * tau = R * theta``, ``e = c_v * theta``. The
mathematical entropy is ``eta = -S`` and its flux vanishes identically in
Lagrangian coordinates, so relative fluxes reduce to
``q(u; v) = -grad eta(v) . (f(u) - f(v))``.

Every public function accepts a :class:`~frontlab.models.State` or an array
whose trailing dimension is 3. Array inputs are evaluated elementwise and
return arrays; ``State`` inputs return plain floats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from frontlab.errors import DomainError
from frontlab.models import GasParameters, State, StateBox, ThermoState, as_vector

logger = logging.getLogger(__name__)

StateLike = State | np.ndarray


# ---------------------------------------------------------------------------
# Array helpers
# ---------------------------------------------------------------------------


def _components(u: StateLike) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split *u* into ``(tau, w, E, e)`` after a domain check."""
    vec = as_vector(u)
    tau, w, energy = vec[..., 0], vec[..., 1], vec[..., 2]
    internal = energy - 0.5 * w * w
    if np.any(tau <= 0.0):
        raise DomainError("specific volume must be positive", field="tau")
    if np.any(internal <= 0.0):
        raise DomainError("internal energy must be positive", field="internal_energy")
    return tau, w, energy, internal


def _out(value: np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# Equation of state
# ---------------------------------------------------------------------------


def internal_energy_from(tau: float | np.ndarray, p: float | np.ndarray, gas: GasParameters):
    """Caloric closure ``e(tau, p) = p tau / (gamma - 1)``."""
    return p * tau / (gas.gamma - 1.0)


def pressure(u: StateLike, gas: GasParameters) -> float | np.ndarray:
    tau, _, _, internal = _components(u)
    return _out((gas.gamma - 1.0) * internal / tau)


def temperature(u: StateLike, gas: GasParameters) -> float | np.ndarray:
    _, _, _, internal = _components(u)
    return _out(internal / gas.c_v)


def sound_speed(u: StateLike, gas: GasParameters) -> float | np.ndarray:
    """Lagrangian sound speed ``sqrt(gamma p / tau)``."""
    tau, _, _, internal = _components(u)
    p = (gas.gamma - 1.0) * internal / tau
    return _out(np.sqrt(gas.gamma * p / tau))


def complete_thermo(u: State, gas: GasParameters) -> ThermoState:
    """Return pressure, temperature, physical entropy and internal energy of *u*.

    Raises:
        DomainError: If ``tau`` or the internal energy is not positive.
    """
    tau, _, _, internal = _components(u)
    tau, internal = float(tau), float(internal)
    p = (gas.gamma - 1.0) * internal / tau
    theta = internal / gas.c_v
    entropy = gas.c_v * math.log(p * tau**gas.gamma / gas.k_bar)
    return ThermoState(pressure=p, temperature=theta, entropy=entropy, internal_energy=internal)


def state_from_primitive(tau: float, w: float, p: float, gas: GasParameters) -> State:
    """Build the conserved state with specific volume *tau*, velocity *w* and pressure *p*."""
    if tau <= 0.0:
        raise DomainError(f"specific volume must be positive, got {tau}", field="tau")
    if p <= 0.0:
        raise DomainError(f"pressure must be positive, got {p}", field="pressure")
    return State(tau, w, 0.5 * w * w + internal_energy_from(tau, p, gas))


def flux(u: StateLike, gas: GasParameters) -> np.ndarray:
    """Lagrangian flux ``f(u) = (-w, p, w p)``."""
    tau, w, _, internal = _components(u)
    p = (gas.gamma - 1.0) * internal / tau
    return np.stack([-w, p, w * p], axis=-1)


# ---------------------------------------------------------------------------
# Entropy pair
# ---------------------------------------------------------------------------


def eta(u: StateLike, gas: GasParameters) -> float | np.ndarray:
    """Mathematical entropy ``eta = -S``."""
    tau, _, _, internal = _components(u)
    value = gas.c_v * (
        (1.0 - gas.gamma) * np.log(tau)
        - np.log(internal)
        + math.log(gas.k_bar / (gas.gamma - 1.0))
    )
    return _out(value)


def entropy_pair(u: StateLike, gas: GasParameters) -> tuple[float, float]:
    """Return ``(eta, q)``; the entropy flux is zero for the Lagrangian system."""
    return eta(u, gas), 0.0


def eta_gradient(v: StateLike, gas: GasParameters) -> np.ndarray:
    """Closed-form gradient of ``eta`` in conserved variables.

    Equals ``(-p/theta, w/theta, -1/theta)``.
    """
    tau, w, _, internal = _components(v)
    return np.stack(
        [
            gas.c_v * (1.0 - gas.gamma) / tau,
            gas.c_v * w / internal,
            -gas.c_v / internal,
        ],
        axis=-1,
    )


def eta_hessian(v: StateLike, gas: GasParameters) -> np.ndarray:
    """Closed-form Hessian of ``eta`` in conserved variables (3x3, symmetric)."""
    tau, w, _, internal = _components(v)
    tau, w, internal = float(tau), float(w), float(internal)
    c_v = gas.c_v
    h_ww = c_v / internal + c_v * w * w / internal**2
    h_we = -c_v * w / internal**2
    h_ee = c_v / internal**2
    return np.array(
        [
            [c_v * (gas.gamma - 1.0) / tau**2, 0.0, 0.0],
            [0.0, h_ww, h_we],
            [0.0, h_we, h_ee],
        ]
    )


# ---------------------------------------------------------------------------
# Relative quantities
# ---------------------------------------------------------------------------


def relative_entropy(u: StateLike, v: StateLike, gas: GasParameters) -> float | np.ndarray:
    """``eta(u|v) = eta(u) - eta(v) - grad eta(v) . (u - v)``; non-negative."""
    du = as_vector(u) - as_vector(v)
    value = eta(u, gas) - eta(v, gas) - np.sum(eta_gradient(v, gas) * du, axis=-1)
    return _out(np.asarray(value))


def relative_flux(u: StateLike, v: StateLike, gas: GasParameters) -> float | np.ndarray:
    """``q(u; v) = -grad eta(v) . (f(u) - f(v))``."""
    df = flux(u, gas) - flux(v, gas)
    return _out(np.asarray(-np.sum(eta_gradient(v, gas) * df, axis=-1)))


# ---------------------------------------------------------------------------
# Box-level constants
# ---------------------------------------------------------------------------


def sound_speed_bounds(box: StateBox, gas: GasParameters) -> tuple[float, float]:
    """Exact ``(min, max)`` of the sound speed over the box.

    ``c**2 = gamma (gamma - 1) e / tau**2`` is monotone in ``e`` and
    ``tau``, so the extrema sit at box corners.
    """
    w_lo, w_hi = box.lower[1], box.upper[1]
    w_sq_max = max(w_lo**2, w_hi**2)
    w_sq_min = 0.0 if w_lo <= 0.0 <= w_hi else min(w_lo**2, w_hi**2)
    e_min = box.lower[2] - 0.5 * w_sq_max
    e_max = box.upper[2] - 0.5 * w_sq_min
    if e_min <= 0.0:
        raise DomainError("box reaches non-positive internal energy", field="internal_energy")
    k = gas.gamma * (gas.gamma - 1.0)
    return math.sqrt(k * e_min) / box.upper[0], math.sqrt(k * e_max) / box.lower[0]


@dataclass(frozen=True)
class CStarReport:
    """Empirical equivalence constant between ``eta(u|v)`` and ``|u - v|**2``.

    Attributes:
        c_star: Smallest ``C`` with ``|u-v|^2 / C <= eta(u|v) <= C |u-v|^2``
            on every sampled pair.
        min_ratio: Smallest sampled ``eta(u|v) / |u-v|^2``.
        max_ratio: Largest sampled ratio.
        min_hessian_eigenvalue: Smallest Hessian eigenvalue over the box grid.
        n_pairs: Number of sampled pairs.
    """

    c_star: float
    min_ratio: float
    max_ratio: float
    min_hessian_eigenvalue: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "c_star": self.c_star,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "min_hessian_eigenvalue": self.min_hessian_eigenvalue,
            "n_pairs": self.n_pairs,
        }


def calibrate_cstar(
    box: StateBox,
    gas: GasParameters,
    *,
    n_pairs: int = 2000,
    grid_n: int = 7,
    seed: int = 0,
) -> CStarReport:
    """Sample pairs in *box* and measure the relative-entropy equivalence constant."""
    rng = np.random.default_rng(seed)
    u = box.sample(rng, n_pairs)
    v = box.sample(rng, n_pairs)
    dist_sq = np.sum((u - v) ** 2, axis=-1)
    keep = dist_sq > 1e-16
    ratios = relative_entropy(u[keep], v[keep], gas) / dist_sq[keep]

    eigen_min = min(
        float(np.linalg.eigvalsh(eta_hessian(node, gas))[0]) for node in box.grid(grid_n)
    )
    min_ratio, max_ratio = float(np.min(ratios)), float(np.max(ratios))
    report = CStarReport(
        c_star=max(max_ratio, 1.0 / min_ratio),
        min_ratio=min_ratio,
        max_ratio=max_ratio,
        min_hessian_eigenvalue=eigen_min,
        n_pairs=int(np.count_nonzero(keep)),
    )
    logger.info("calibrated C* = %.6g over %d pairs", report.c_star, report.n_pairs)
    return report
