"""Glimm functional and the space-time weight of shifted fronts.

``L`` is the total wave strength, ``Q`` the interaction potential over
approaching pairs and ``Upsilon = L + kappa Q``. The weight ``a(x, t)`` is
built inductively from the left: it starts at ``1 + C1 Upsilon`` and
changes only across shocks and contacts.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from frontlab.errors import ConfigurationError
from frontlab.models import CONTACT, NON_PHYSICAL, RAREFACTION, SHOCK, Front, GasParameters, Profile
from frontlab.physics.gas import temperature
from frontlab.tracking.tracker import TrajectoryRecord

logger = logging.getLogger(__name__)

#: Relative tolerance of the contact ratio check.
CONTACT_RATIO_TOL: float = 1e-12
#: Absolute slack of the Upsilon decay check.
DECAY_TOL: float = 1e-12
KAPPA_SEARCH: tuple[float, ...] = tuple(float(2**k) for k in range(11))


# ---------------------------------------------------------------------------
# Glimm functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlimmReport:
    """``L``, ``Q`` and ``Upsilon`` of one profile.

    Attributes:
        pairs: ``(left_id, right_id, |sigma_l| |sigma_r|)`` for every
            approaching pair; empty unless requested.
    """

    L: float
    Q: float
    kappa: float
    upsilon: float
    pairs: tuple[tuple[int, int, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "Q": self.Q,
            "kappa": self.kappa,
            "upsilon": self.upsilon,
            "pairs": [list(p) for p in self.pairs],
        }


def approaching_mask(fronts: Sequence[Front]) -> np.ndarray:
    """Boolean matrix ``M[i, j]``: front ``i`` lies left of ``j`` and they approach."""
    n = len(fronts)
    families = np.array([f.family for f in fronts], dtype=int)
    shocks = np.array([f.kind == SHOCK for f in fronts], dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    different = families[:, None] > families[None, :]
    genuinely_nonlinear = np.isin(families, (1, 3))
    same = (
        (families[:, None] == families[None, :])
        & genuinely_nonlinear[:, None]
        & (shocks[:, None] | shocks[None, :])
    )
    return upper & (different | same)


def glimm(profile: Profile, kappa: float, *, with_pairs: bool = False) -> GlimmReport:
    """Glimm functional of *profile*; strengths are curve-parameter magnitudes."""
    fronts = profile.fronts
    strengths = np.array([f.strength for f in fronts], dtype=float)
    big_l = float(strengths.sum())
    if len(fronts) < 2:
        return GlimmReport(L=big_l, Q=0.0, kappa=kappa, upsilon=big_l)
    mask = approaching_mask(fronts)
    products = np.outer(strengths, strengths) * mask
    big_q = float(products.sum())
    pairs: tuple[tuple[int, int, float], ...] = ()
    if with_pairs:
        rows, cols = np.nonzero(mask)
        pairs = tuple((fronts[i].id, fronts[j].id, float(products[i, j])) for i, j in zip(rows, cols))
    return GlimmReport(L=big_l, Q=big_q, kappa=kappa, upsilon=big_l + kappa * big_q, pairs=pairs)


def glimm_series(
    trajectory: TrajectoryRecord, kappa: float, times: Iterable[float] | None = None
) -> list[tuple[float, float, float, float]]:
    """``(t, L, Q, Upsilon)`` at the initial time, after every event time and at the final time."""
    if times is None:
        times = sorted({trajectory.t_start, *trajectory.event_times(), trajectory.t_final})
    rows = []
    for t in times:
        report = glimm(trajectory.profile_at(t), kappa)
        rows.append((t, report.L, report.Q, report.upsilon))
    return rows


# ---------------------------------------------------------------------------
# Weight
# ---------------------------------------------------------------------------


def sigma_bar(front: Front, c1: float, j: float, gas: GasParameters) -> float:
    """Signed strength entering the weight increments."""
    if front.kind == CONTACT:
        return (temperature(front.right_state, gas) - temperature(front.left_state, gas)) / (c1 * j)
    if front.kind == SHOCK:
        return -front.jump
    return front.jump


def _negative_part(x: float) -> float:
    return max(-x, 0.0)


@dataclass(frozen=True)
class WeightProfile:
    """Piecewise-constant weight aligned with a profile's fronts.

    Attributes:
        levels: ``len(fronts) + 1`` values, left to right.
        sigma_bars: Signed strength of every front.
        upsilon: ``L + kappa Q`` of the profile.
    """

    time: float
    fronts: tuple[Front, ...]
    levels: np.ndarray
    sigma_bars: np.ndarray
    c1: float
    j: float
    kappa: float
    upsilon: float
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", np.array([f.position for f in self.fronts], dtype=float))

    def weight_at(self, x: float | np.ndarray, side: str = "+") -> float | np.ndarray:
        mode = "right" if side == "+" else "left"
        index = np.searchsorted(self.positions, x, side=mode)
        values = self.levels[index]
        return float(values) if np.ndim(values) == 0 else values

    def sides(self, index: int) -> tuple[float, float]:
        """Weights ``(a_left, a_right)`` across front *index*."""
        return float(self.levels[index]), float(self.levels[index + 1])

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "C1": self.c1,
            "J": self.j,
            "kappa": self.kappa,
            "upsilon": self.upsilon,
            "positions": self.positions.tolist(),
            "levels": self.levels.tolist(),
            "sigma_bar": self.sigma_bars.tolist(),
        }


def build_weight(profile: Profile, kappa: float, c1: float, gas: GasParameters, j: float) -> WeightProfile:
    """Weight of *profile*, built from the extreme left.

    Raises:
        ConfigurationError: If some level is not positive (``C1`` too large
            for the data).
    """
    report = glimm(profile, kappa)
    levels = np.empty(len(profile.fronts) + 1)
    bars = np.empty(len(profile.fronts))
    level = 1.0 + c1 * report.upsilon
    levels[0] = level
    for index, front in enumerate(profile.fronts):
        bar = sigma_bar(front, c1, j, gas)
        bars[index] = bar
        if front.kind == CONTACT:
            theta_left = float(temperature(front.left_state, gas))
            level = level + c1 * (j * level / theta_left) * bar
        elif front.kind == SHOCK and front.family == 1:
            level = level - c1 * _negative_part(bar)
        elif front.kind == SHOCK and front.family == 3:
            level = level + c1 * _negative_part(bar)
        levels[index + 1] = level
    if np.any(levels <= 0.0):
        worst = int(np.argmin(levels))
        raise ConfigurationError(f"weight level {levels[worst]:.6g} <= 0 at cell {worst}; reduce C1")
    return WeightProfile(
        time=profile.time,
        fronts=profile.fronts,
        levels=levels,
        sigma_bars=bars,
        c1=c1,
        j=j,
        kappa=kappa,
        upsilon=report.upsilon,
    )


@dataclass(frozen=True)
class AuditReport:
    """Outcome of an audit: ``passed`` and human-readable ``violations``."""

    name: str
    passed: bool
    checked: int
    violations: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "violations": list(self.violations),
            "details": self.details,
        }


def shock_ratio_window(family: int, c1: float, s0: float) -> tuple[float, float]:
    """Admissible ``a_right / a_left`` across a shock of jump size *s0*."""
    if family == 1:
        return 1.0 - 2.0 * c1 * s0, 1.0 - 0.5 * c1 * s0
    return 1.0 + 0.5 * c1 * s0, 1.0 + 2.0 * c1 * s0


def check_ratios(weight: WeightProfile, gas: GasParameters) -> AuditReport:
    """Per-front ratio constraints of the weight."""
    violations = []
    for index, front in enumerate(weight.fronts):
        a_left, a_right = weight.sides(index)
        ratio = a_right / a_left
        if front.kind == CONTACT:
            expected = float(temperature(front.right_state, gas) / temperature(front.left_state, gas))
            if abs(ratio - expected) > CONTACT_RATIO_TOL * expected:
                violations.append(f"contact {front.id}: ratio {ratio!r} != theta_R/theta_L {expected!r}")
        elif front.kind == SHOCK:
            lo, hi = shock_ratio_window(front.family, weight.c1, front.jump)
            if not lo - 1e-15 <= ratio <= hi + 1e-15:
                violations.append(f"{front.family}-shock {front.id}: ratio {ratio:.12g} outside [{lo:.12g}, {hi:.12g}]")
        elif front.kind in (RAREFACTION, NON_PHYSICAL) and ratio != 1.0:
            violations.append(f"{front.kind} {front.id}: weight changes across the front")
    return AuditReport("weight_ratios", not violations, len(weight.fronts), tuple(violations))


# ---------------------------------------------------------------------------
# Decay in time
# ---------------------------------------------------------------------------


def _probe_points(before: WeightProfile, after: WeightProfile, excluded: Sequence[float]) -> np.ndarray:
    breaks = np.unique(np.concatenate([before.positions, after.positions, np.asarray(excluded, dtype=float)]))
    if breaks.size == 0:
        return np.array([0.0])
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    return np.concatenate([[breaks[0] - 1.0], mids, [breaks[-1] + 1.0]])


def weight_decay_audit(
    trajectory: TrajectoryRecord, kappa: float, c1: float, gas: GasParameters, j: float
) -> AuditReport:
    """``Upsilon`` and the weight must not increase across any event time.

    The pointwise check compares ``a(x, t+)`` with ``a(x, t-)`` at one probe
    inside every cell of the common refinement, so interaction points
    themselves are never probed.
    """
    violations = []
    upsilon_jumps = []
    by_time: dict[float, list[float]] = {}
    for event in trajectory.events:
        by_time.setdefault(event.time, []).append(event.position)
    for t, where in by_time.items():
        before = build_weight(trajectory.profile_at(t, "-"), kappa, c1, gas, j)
        after = build_weight(trajectory.profile_at(t, "+"), kappa, c1, gas, j)
        delta = after.upsilon - before.upsilon
        upsilon_jumps.append(delta)
        if delta > DECAY_TOL:
            violations.append(f"t={t:.12g}: Upsilon increased by {delta:.3e}")
        probes = _probe_points(before, after, where)
        grow = after.weight_at(probes) - before.weight_at(probes) * (1.0 + DECAY_TOL)
        if np.any(grow > DECAY_TOL):
            k = int(np.argmax(grow))
            violations.append(f"t={t:.12g}: weight increased by {grow[k]:.3e} at x={probes[k]:.12g}")
    details = {"max_upsilon_jump": max(upsilon_jumps, default=0.0), "event_times": len(by_time)}
    return AuditReport("weight_decay", not violations, len(by_time), tuple(violations), details)


@dataclass(frozen=True)
class CalibratedValue:
    name: str
    value: float
    passed: bool
    tried: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "passed": self.passed, "tried": list(self.tried)}


def _event_glimm_pairs(trajectory: TrajectoryRecord) -> list[tuple[float, float, float, float]]:
    rows = []
    for t in trajectory.event_times():
        before = glimm(trajectory.profile_at(t, "-"), 0.0)
        after = glimm(trajectory.profile_at(t, "+"), 0.0)
        rows.append((before.L, before.Q, after.L, after.Q))
    return rows


def calibrate_kappa(
    trajectories: Sequence[TrajectoryRecord],
    c1: float,
    gas: GasParameters,
    j: float,
    candidates: Sequence[float] = KAPPA_SEARCH,
) -> CalibratedValue:
    """Smallest candidate ``kappa`` for which ``Upsilon`` and the weight decay on every trajectory."""
    tables = [_event_glimm_pairs(traj) for traj in trajectories]
    tried = []
    for kappa in candidates:
        tried.append(kappa)
        upsilon_ok = all(
            l1 + kappa * q1 <= l0 + kappa * q0 + DECAY_TOL for table in tables for l0, q0, l1, q1 in table
        )
        if not upsilon_ok:
            continue
        try:
            decay_ok = all(weight_decay_audit(traj, kappa, c1, gas, j).passed for traj in trajectories)
        except ConfigurationError:
            decay_ok = False
        if decay_ok:
            logger.info("calibrated kappa=%g over %d trajectories", kappa, len(trajectories))
            return CalibratedValue("kappa", kappa, True, tuple(tried))
    logger.warning("no kappa in %s makes every trajectory decay", list(candidates))
    return CalibratedValue("kappa", float(candidates[-1]), False, tuple(tried))


def calibrate_c1(
    profiles: Sequence[Profile],
    kappa: float,
    gas: GasParameters,
    j: float,
    start: float = 1.0,
    max_halvings: int = 20,
) -> CalibratedValue:
    """Halve ``C1`` from *start* until every weight is positive and meets the ratio windows."""
    c1 = start
    tried = []
    for _ in range(max_halvings + 1):
        tried.append(c1)
        try:
            ok = all(check_ratios(build_weight(p, kappa, c1, gas, j), gas).passed for p in profiles)
        except ConfigurationError:
            ok = False
        if ok:
            if c1 != start:
                logger.info("shrunk C1 from %g to %g", start, c1)
            return CalibratedValue("C1", c1, True, tuple(tried))
        c1 *= 0.5
    logger.warning("C1 calibration failed down to %g", tried[-1])
    return CalibratedValue("C1", tried[-1], False, tuple(tried))


def weight_bounds(weight: WeightProfile) -> tuple[float, float]:
    return float(weight.levels.min()), float(weight.levels.max())
