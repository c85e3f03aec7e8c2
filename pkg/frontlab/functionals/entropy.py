"""Weighted relative entropy between a reference solution and a shifted approximation.

The reference ``u`` is anything that reports piecewise-constant snapshots
(a :class:`~frontlab.tracking.tracker.TrajectoryRecord` or a static
:class:`GridFunction`) or, for the rarefaction checks, an exact
:class:`RarefactionFanSolution`. The approximation ``psi`` is always a
front-tracking trajectory carrying the weight ``a`` of
:mod:`frontlab.functionals.glimm`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol

import numpy as np

from frontlab.errors import FrontlabError, StageError, UsageError
from frontlab.functionals.bly import SlopeFit, loglog_fit, nu_sweep_slope, phi
from frontlab.functionals.glimm import AuditReport, build_weight
from frontlab.models import (
    CONTACT,
    FRONT_KINDS,
    NON_PHYSICAL,
    RAREFACTION,
    SHOCK,
    Front,
    GasParameters,
    Profile,
    Slice,
    State,
    StateBox,
)
from frontlab.physics.gas import (
    eta,
    pressure,
    relative_entropy,
    relative_flux,
    state_from_primitive,
    temperature,
)
from frontlab.physics.waves import characteristic_speed, contact_curve, rarefaction_curve
from frontlab.tracking.data import perturbed
from frontlab.tracking.shifts import ShiftWindow, TraceDriven
from frontlab.tracking.solvers import discretize_initial
from frontlab.tracking.tracker import SchemeParameters, TrajectoryRecord, evolve, rh_speed

logger = logging.getLogger(__name__)

INFO_SPEED_MARGIN: float = 1.05
#: Interior production of a quadrilateral may exceed zero by this multiple of its nu-allowance.
LOCAL_ALLOWANCE_FACTOR: float = 10.0
LEDGER_TOL: float = 1e-9
#: Fitted terminal-vs-initial exponent must reach ``STABILITY_EXPONENT - STABILITY_EXPONENT_TOL``.
STABILITY_EXPONENT: float = 0.5
STABILITY_EXPONENT_TOL: float = 0.1
#: Terminal distances change by O(nu) between nu rungs: fitted order at least ``1 - NU_REFINEMENT_TOL``.
NU_REFINEMENT_ORDER: float = 1.0
NU_REFINEMENT_TOL: float = 0.3
GAUSS_POINTS: int = 16
_MAX_REPORTED: int = 20

LEDGER_BUCKETS: tuple[str, ...] = (
    SHOCK,
    CONTACT,
    RAREFACTION,
    NON_PHYSICAL,
    "boundary",
    "reference",
    "event_jumps",
)


class PiecewiseConstantSolution(Protocol):
    """A solution that can be sliced into constant pieces at any time."""

    def snapshot(self, t: float, side: str = "+") -> Slice: ...

    def change_times(self) -> list[float]: ...


# ---------------------------------------------------------------------------
# Dissipation at one front
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DissipationSample:
    """Dissipation functional at one front for given traces, weights and speed."""

    front_id: int
    t: float
    kind: str
    family: int
    left_trace: State
    right_trace: State
    a_left: float
    a_right: float
    h_dot: float
    rh: float
    D: float
    s0: float

    @property
    def shift_penalty(self) -> float:
        """``a_right s0 (h' - rh)**2``."""
        return self.a_right * self.s0 * (self.h_dot - self.rh) ** 2

    def to_dict(self) -> dict:
        return {
            "front_id": self.front_id,
            "t": self.t,
            "kind": self.kind,
            "family": self.family,
            "left_trace": self.left_trace.to_dict(),
            "right_trace": self.right_trace.to_dict(),
            "a_left": self.a_left,
            "a_right": self.a_right,
            "h_dot": self.h_dot,
            "rh": self.rh,
            "D": self.D,
        }


def dissipation_value(
    u_minus: State | np.ndarray,
    u_plus: State | np.ndarray,
    left: State | np.ndarray,
    right: State | np.ndarray,
    a_left: float | np.ndarray,
    a_right: float | np.ndarray,
    h_dot: float | np.ndarray,
    gas: GasParameters,
) -> float | np.ndarray:
    """``a_R [q(u+; u_R) - h' eta(u+|u_R)] - a_L [q(u-; u_L) - h' eta(u-|u_L)]``."""
    right_part = relative_flux(u_plus, right, gas) - h_dot * relative_entropy(u_plus, right, gas)
    left_part = relative_flux(u_minus, left, gas) - h_dot * relative_entropy(u_minus, left, gas)
    return a_right * right_part - a_left * left_part


def dissipation_at_front(
    traces: tuple[State, State],
    front: Front,
    a_left: float,
    a_right: float,
    h_dot: float,
    gas: GasParameters,
    t: float = 0.0,
) -> DissipationSample:
    u_minus, u_plus = traces
    value = dissipation_value(u_minus, u_plus, front.left_state, front.right_state, a_left, a_right, h_dot, gas)
    rh = rh_speed(front, gas) if front.kind in (SHOCK, CONTACT) else front.speed
    return DissipationSample(
        front_id=front.id,
        t=t,
        kind=front.kind,
        family=front.family,
        left_trace=u_minus,
        right_trace=u_plus,
        a_left=a_left,
        a_right=a_right,
        h_dot=h_dot,
        rh=rh,
        D=float(value),
        s0=front.jump,
    )


# ---------------------------------------------------------------------------
# Information speed
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfoSpeed:
    """Speed ``s`` with ``|q(a; b)| <= s eta(a|b)`` on the sampled pairs.

    Attributes:
        raw: Largest sampled ratio before the margin.
        certificate: The pair ``(a, b)`` attaining ``raw``.
        enforced: Whether ``s`` was raised above ``lambda_hat``.
    """

    s: float
    lambda_hat: float
    raw: float
    certificate: tuple[State, State]
    n_pairs: int
    enforced: bool

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "lambda_hat": self.lambda_hat,
            "raw": self.raw,
            "certificate": [self.certificate[0].to_dict(), self.certificate[1].to_dict()],
            "n_pairs": self.n_pairs,
            "enforced": self.enforced,
        }


def info_speed(
    box: StateBox,
    psi_range: Sequence[State] | np.ndarray,
    gas: GasParameters,
    lambda_hat: float,
    grid_n: int = 9,
) -> InfoSpeed:
    """Information speed over box grid states ``a`` and attained states ``b``.

    Raises:
        UsageError: If *psi_range* is empty.
    """
    b_states = np.array([s.as_array() if isinstance(s, State) else s for s in psi_range], dtype=float)
    if b_states.size == 0:
        raise UsageError("information speed needs at least one attained state")
    b_states = np.unique(b_states.reshape(-1, 3), axis=0)
    a_states = box.grid(grid_n)
    a_all = np.repeat(a_states, len(b_states), axis=0)
    b_all = np.tile(b_states, (len(a_states), 1))
    rel = relative_entropy(a_all, b_all, gas)
    keep = rel > 1e-14
    ratios = np.abs(relative_flux(a_all[keep], b_all[keep], gas)) / rel[keep]
    k = int(np.argmax(ratios))
    raw = float(ratios[k])
    s = INFO_SPEED_MARGIN * raw
    enforced = s <= lambda_hat
    if enforced:
        s = INFO_SPEED_MARGIN * lambda_hat
        logger.info("information speed raised from %.4g to %.4g above lambda_hat", INFO_SPEED_MARGIN * raw, s)
    certificate = (State.from_array(a_all[keep][k]), State.from_array(b_all[keep][k]))
    return InfoSpeed(s, lambda_hat, raw, certificate, int(np.count_nonzero(keep)), enforced)


# ---------------------------------------------------------------------------
# Reference solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    """Time-independent piecewise-constant function sampled on a grid.

    Attributes:
        edges: ``m + 1`` increasing cell edges.
        values: ``(m, 3)`` cell values; the end values extend to infinity.
    """

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float).reshape(-1, 3)
        if len(edges) != len(values) + 1 or np.any(np.diff(edges) <= 0.0):
            raise UsageError("grid functions need m + 1 increasing edges for m values")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    def snapshot(self, t: float = 0.0, side: str = "+") -> Slice:
        inner = self.edges[1:-1]
        return Slice(
            positions=inner,
            speeds=np.zeros_like(inner),
            states=self.values,
            kinds=("grid",) * len(inner),
            strengths=np.linalg.norm(np.diff(self.values, axis=0), axis=1),
            families=np.zeros(len(inner), dtype=int),
        )

    def change_times(self) -> list[float]:
        return []

    def state_at(self, x: float, t: float = 0.0, side: str = "+") -> State:
        return State.from_array(self.snapshot().values_at(x, side))

    def traces(self, x: float, t: float = 0.0) -> tuple[State, State]:
        return self.state_at(x, t, "-"), self.state_at(x, t, "+")


def oscillatory_profile(
    reference: State,
    amplitude: float,
    n_cells: int,
    interval: tuple[float, float] = (-1.0, 1.0),
    component: int = 1,
    box: StateBox | None = None,
) -> GridFunction:
    """``reference + amplitude sqrt|x| sin(1/|x|)`` in one component, sampled at cell midpoints."""
    edges = np.linspace(*interval, n_cells + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        bump = np.where(mids == 0.0, 0.0, np.sqrt(np.abs(mids)) * np.sin(1.0 / np.abs(mids)))
    values = np.tile(reference.as_array(), (n_cells, 1))
    values[:, component] += amplitude * bump
    if box is not None:
        for row in values:
            box.require(row, "oscillatory profile value")
    return GridFunction(edges=edges, values=values)


@dataclass(frozen=True)
class RarefactionFanSolution:
    """Centered rarefaction fan ``u_L -> u_R`` emanating from ``(x0, t0)``."""

    u_left: State
    u_right: State
    family: int
    gas: GasParameters
    x0: float = 0.0
    t0: float = 0.0

    def __post_init__(self) -> None:
        sigma = self.speed_right - self.speed_left
        if sigma < 0.0:
            raise UsageError("a rarefaction fan needs lambda(u_R) >= lambda(u_L)")
        end = rarefaction_curve(self.u_left, self.family, sigma, self.gas).state
        if float(np.max(np.abs(end.as_array() - self.u_right.as_array()))) > 1e-8:
            raise UsageError("u_R does not lie on the rarefaction curve through u_L")

    @classmethod
    def from_strength(cls, u_left: State, family: int, sigma: float, gas: GasParameters, **kwargs) -> RarefactionFanSolution:
        right = rarefaction_curve(u_left, family, sigma, gas).state
        return cls(u_left=u_left, u_right=right, family=family, gas=gas, **kwargs)

    @property
    def speed_left(self) -> float:
        return characteristic_speed(self.u_left, self.family, self.gas)

    @property
    def speed_right(self) -> float:
        return characteristic_speed(self.u_right, self.family, self.gas)

    @property
    def delta(self) -> float:
        """``|v_L - v_R| + sup |u_L - u(y)|`` over the fan."""
        samples = np.linspace(0.0, self.speed_right - self.speed_left, 9)
        far = max(
            float(np.linalg.norm(_fan_state(self.u_left, self.family, float(s), self.gas) - self.u_left.as_array()))
            for s in samples
        )
        return abs(self.speed_right - self.speed_left) + far

    def state_at(self, x: float, t: float, side: str = "+") -> State:
        if t <= self.t0:
            return self.u_left if (x < self.x0 or (x == self.x0 and side == "-")) else self.u_right
        xi = (x - self.x0) / (t - self.t0)
        if xi <= self.speed_left:
            return self.u_left
        if xi >= self.speed_right:
            return self.u_right
        return State.from_array(_fan_state(self.u_left, self.family, xi - self.speed_left, self.gas))

    def traces(self, x: float, t: float) -> tuple[State, State]:
        return self.state_at(x, t, "-"), self.state_at(x, t, "+")

    def breakpoints(self, t: float) -> list[float]:
        if t <= self.t0:
            return [self.x0]
        return [self.x0 + self.speed_left * (t - self.t0), self.x0 + self.speed_right * (t - self.t0)]


@lru_cache(maxsize=4096)
def _fan_point(key: tuple[float, float, float], family: int, sigma: float, gas: GasParameters) -> tuple[float, ...]:
    return tuple(rarefaction_curve(State(*key), family, sigma, gas).state.as_array().tolist())


def _fan_state(u_left: State, family: int, sigma: float, gas: GasParameters) -> np.ndarray:
    key = tuple(u_left.as_array().tolist())
    return np.array(_fan_point(key, family, round(sigma, 15), gas))


def trace_at(reference, x: float, t: float) -> tuple[State, State]:
    """One-sided traces ``(u(x-, t), u(x+, t))`` of any reference solution."""
    return reference.traces(x, t)


# ---------------------------------------------------------------------------
# Energies & distances
# ---------------------------------------------------------------------------


def _advance(snapshot: Slice, dt: float) -> np.ndarray:
    positions = snapshot.advanced(dt)
    return np.maximum.accumulate(positions) if positions.size else positions


def _cells(window: tuple[float, float], *positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = window
    inner = [p[(p > lo) & (p < hi)] for p in positions]
    edges = np.unique(np.concatenate([[lo, hi], *inner]))
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def _energy(
    u: Slice,
    psi: Slice,
    levels: np.ndarray,
    dt: float,
    window: tuple[float, float],
    gas: GasParameters,
) -> float:
    if window[1] <= window[0]:
        return 0.0
    pu, pp = _advance(u, dt), _advance(psi, dt)
    mids, lengths = _cells(window, pu, pp)
    u_values = u.states[np.searchsorted(pu, mids, side="right")]
    k = np.searchsorted(pp, mids, side="right")
    return float(np.sum(lengths * levels[k] * relative_entropy(u_values, psi.states[k], gas)))


@dataclass(frozen=True)
class EnergyValue:
    value: float
    quadrature_bound: float


def weighted_energy(
    u,
    psi_profile: Profile,
    weight,
    window: tuple[float, float],
    gas: GasParameters,
    n_sub: int = 32,
) -> EnergyValue:
    """``int a eta(u|psi) dx`` over *window*.

    Piecewise-constant references are integrated exactly. Other references
    use the midpoint rule on ``n_sub`` cells per constant piece of ``psi``;
    the bound is a third of the midpoint/trapezoid discrepancy.

    Raises:
        UsageError: If *weight* was not built for *psi_profile* or the
            window is empty.
    """
    if abs(weight.time - psi_profile.time) > 1e-12 or len(weight.fronts) != len(psi_profile.fronts):
        raise UsageError("weight and psi profile are misaligned")
    if not window[1] > window[0]:
        raise UsageError(f"empty window {window}")
    t = psi_profile.time
    psi = psi_profile.to_slice()
    if hasattr(u, "snapshot"):
        return EnergyValue(_energy(u.snapshot(t), psi, weight.levels, 0.0, window, gas), 0.0)

    extra = np.asarray(getattr(u, "breakpoints", lambda _t: [])(t), dtype=float)
    edges = np.unique(np.concatenate([window, psi.positions[(psi.positions > window[0]) & (psi.positions < window[1])],
                                      extra[(extra > window[0]) & (extra < window[1])]]))
    midpoint = trapezoid = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xm = 0.5 * (a + b)
        k = int(psi.index(xm))
        base, level = psi.states[k], float(weight.levels[k])
        nodes = np.linspace(a, b, n_sub + 1)
        centers = 0.5 * (nodes[1:] + nodes[:-1])
        h = (b - a) / n_sub

        def density(xs: np.ndarray) -> np.ndarray:
            values = np.array([u.state_at(float(x), t).as_array() for x in xs])
            return level * relative_entropy(values, np.broadcast_to(base, values.shape), gas)

        midpoint += h * float(np.sum(density(centers)))
        ends = density(nodes)
        trapezoid += h * float(np.sum(ends) - 0.5 * (ends[0] + ends[-1]))
    return EnergyValue(midpoint, abs(midpoint - trapezoid) / 3.0)


def total_entropy(profile: Profile, window: tuple[float, float], gas: GasParameters) -> float:
    """``int eta(psi) dx`` over *window*."""
    sl = profile.to_slice()
    mids, lengths = _cells(window, sl.positions)
    return float(np.sum(lengths * eta(sl.values_at(mids), gas)))


def _difference(u: Profile, v: Profile, window: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    su, sv = u.to_slice(), v.to_slice()
    mids, lengths = _cells(window, su.positions, sv.positions)
    return lengths, np.linalg.norm(su.values_at(mids) - sv.values_at(mids), axis=1)


def l2_distance(u: Profile, v: Profile, window: tuple[float, float]) -> float:
    lengths, diff = _difference(u, v, window)
    return float(math.sqrt(np.sum(lengths * diff**2)))


def l1_norm_distance(u: Profile, v: Profile, window: tuple[float, float]) -> float:
    lengths, diff = _difference(u, v, window)
    return float(np.sum(lengths * diff))


def linf_distance(u: Profile, v: Profile, window: tuple[float, float]) -> float:
    _, diff = _difference(u, v, window)
    return float(diff.max()) if diff.size else 0.0


def entropy_production_audit(trajectory: TrajectoryRecord, gas: GasParameters) -> AuditReport:
    """Total entropy may only grow through contacts, rarefaction steps and non-physical fronts.

    The window is wide enough that no front leaves it, so the exact change
    of ``int eta`` equals ``-sum speed [eta]`` over the fronts, and shocks
    only remove entropy. The non-shock production is the budget.
    """
    times = sorted({trajectory.t_start, *trajectory.change_times(), trajectory.t_final})
    times = [t for t in times if trajectory.t_start <= t <= trajectory.t_final]
    span = trajectory.t_final - trajectory.t_start
    all_positions = [seg[1] for r in trajectory.fronts.values() for seg in r.segments] or [0.0]
    reach = trajectory.params.lambda_hat * span + 1.0
    window = (min(all_positions) - reach, max(all_positions) + reach)
    budget = 0.0
    for a, b in zip(times, times[1:]):
        sl = trajectory.snapshot(a, "+")
        if not sl.positions.size:
            continue
        jumps = np.abs(eta(sl.states[1:], gas) - eta(sl.states[:-1], gas))
        non_shock = np.array([kind != SHOCK for kind in sl.kinds])
        budget += (b - a) * float(np.sum(np.abs(sl.speeds) * jumps * non_shock))
    start = total_entropy(trajectory.profile_at(trajectory.t_start), window, gas)
    end = total_entropy(trajectory.profile_at(trajectory.t_final), window, gas)
    production = end - start
    tol = 1e-10 * (1.0 + abs(start))
    violations = ()
    if production > budget + tol:
        violations = (f"entropy grew by {production:.6e}, above the non-shock budget {budget:.6e}",)
    details = {
        "production": production,
        "budget": budget,
        "budget_over_nu": budget / trajectory.params.nu,
        "window": list(window),
    }
    return AuditReport("entropy_production", not violations, len(times), violations, details)


# ---------------------------------------------------------------------------
# Line traces
# ---------------------------------------------------------------------------


def _crossing_offsets(x0: np.ndarray, v0: np.ndarray, x1: np.ndarray, v1: np.ndarray, span: float) -> np.ndarray:
    """Offsets in ``(0, span)`` at which curves of the first family meet curves of the second."""
    if x0.size == 0 or x1.size == 0:
        return np.empty(0)
    gap = x1[None, :] - x0[:, None]
    rate = v0[:, None] - v1[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        offsets = gap / rate
    valid = (rate != 0.0) & (offsets > 0.0) & (offsets < span)
    return offsets[valid]


def line_traces(
    source: PiecewiseConstantSolution, x0: float, speed: float, t0: float, t1: float
) -> list[tuple[float, float, np.ndarray, np.ndarray]]:
    """Pieces ``(ta, tb, u(x-), u(x+))`` of the traces along ``x = x0 + speed (t - t0)``."""
    breaks = sorted({t0, t1} | {t for t in source.change_times() if t0 < t < t1})
    pieces = []
    for a, b in zip(breaks, breaks[1:]):
        sl = source.snapshot(a, "+")
        xa = x0 + speed * (a - t0)
        offsets = _crossing_offsets(np.array([xa]), np.array([speed]), sl.positions, sl.speeds, b - a)
        cuts = sorted({a, b, *(a + float(o) for o in offsets)})
        for c, d in zip(cuts, cuts[1:]):
            tm = 0.5 * (c + d)
            positions = _advance(sl, tm - a)
            x = x0 + speed * (tm - t0)
            left = sl.states[np.searchsorted(positions, x, side="left")]
            right = sl.states[np.searchsorted(positions, x, side="right")]
            pieces.append((c, d, left, right))
    return pieces


# ---------------------------------------------------------------------------
# Quadrilateral ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ledger:
    """Energy balance over the backward information cone.

    Attributes:
        buckets: Time-integrated contributions: dissipation at ``psi``
            shocks, contacts, rarefaction steps and non-physical fronts;
            boundary fluxes of the cone; production at reference jumps inside
            quadrilaterals; weight jumps at event times.
        shift_penalty: ``int sum_shocks |[psi]| (rh - h')**2 dt``.
        k_required: Smallest ``K`` with
            ``E(tau) <= E(0) - shift_penalty / K + K (nu + sup NP)``.
    """

    initial_energy: float
    terminal_energy: float
    buckets: dict[str, float]
    shift_penalty: float
    np_sup: float
    nu: float
    k_required: float
    identity_error: float
    slabs: int
    quadrilaterals: int
    max_boundary_flux: float
    local_violations: tuple[str, ...] = ()
    slab_violations: tuple[str, ...] = ()
    n_local_violations: int = 0

    @property
    def balanced(self) -> bool:
        scale = 1.0 + abs(self.initial_energy) + sum(abs(v) for v in self.buckets.values())
        return self.identity_error <= LEDGER_TOL * scale

    @property
    def passed(self) -> bool:
        return (
            self.balanced
            and not self.slab_violations
            and self.n_local_violations == 0
            and self.max_boundary_flux <= LEDGER_TOL
            and self.buckets["event_jumps"] <= LEDGER_TOL * (1.0 + abs(self.initial_energy))
        )

    def budget(self, k: float) -> float:
        return self.initial_energy - self.shift_penalty / k + k * (self.nu + self.np_sup)

    def to_dict(self) -> dict:
        return {
            "name": "ledger",
            "passed": self.passed,
            "balanced": self.balanced,
            "initial_energy": self.initial_energy,
            "terminal_energy": self.terminal_energy,
            "buckets": dict(self.buckets),
            "shift_penalty": self.shift_penalty,
            "np_sup": self.np_sup,
            "nu": self.nu,
            "K_required": self.k_required,
            "identity_error": self.identity_error,
            "slabs": self.slabs,
            "quadrilaterals": self.quadrilaterals,
            "max_boundary_flux": self.max_boundary_flux,
            "local_violations": list(self.local_violations),
            "n_local_violations": self.n_local_violations,
            "slab_violations": list(self.slab_violations),
        }


def _rh_speeds(left: np.ndarray, right: np.ndarray, families: np.ndarray, gas: GasParameters) -> np.ndarray:
    d_tau = right[:, 0] - left[:, 0]
    d_p = pressure(right, gas) - pressure(left, gas)
    with np.errstate(divide="ignore", invalid="ignore"):
        magnitude = np.sqrt(np.maximum(-d_p / d_tau, 0.0))
    magnitude = np.where(d_tau == 0.0, 0.0, magnitude)
    return np.where(families == 1, -magnitude, magnitude)


@dataclass
class _LedgerState:
    buckets: dict[str, float]
    shift_penalty: float = 0.0
    shift_penalty_rate: float = 0.0
    quadrilaterals: int = 0
    max_boundary_flux: float = -math.inf
    local: list[str] = field(default_factory=list)
    n_local: int = 0


def _rates(
    us: Slice,
    ps: Slice,
    levels: np.ndarray,
    offset: float,
    cone: tuple[float, float],
    s: float,
    nu: float,
    lambda_hat: float,
    gas: GasParameters,
    acc: _LedgerState,
    when: float,
) -> dict[str, float]:
    """Constant rate of every ledger bucket at one instant of a sub-slab."""
    lo, hi = cone
    pu, pp = _advance(us, offset), _advance(ps, offset)
    rates = {name: 0.0 for name in LEDGER_BUCKETS}

    inside = np.nonzero((pp > lo) & (pp < hi))[0]
    acc.quadrilaterals += len(inside) + 1
    if inside.size:
        x = pp[inside]
        u_minus = us.states[np.searchsorted(pu, x, side="left")]
        u_plus = us.states[np.searchsorted(pu, x, side="right")]
        left, right = ps.states[inside], ps.states[inside + 1]
        values = dissipation_value(
            u_minus, u_plus, left, right, levels[inside], levels[inside + 1], ps.speeds[inside], gas
        )
        kinds = np.array([ps.kinds[k] for k in inside])
        for kind in (SHOCK, CONTACT, RAREFACTION, NON_PHYSICAL):
            rates[kind] += float(np.sum(values[kinds == kind]))
        shocks = kinds == SHOCK
        if np.any(shocks):
            jumps = np.linalg.norm(right[shocks] - left[shocks], axis=1)
            rh = _rh_speeds(left[shocks], right[shocks], ps.families[inside][shocks], gas)
            acc.shift_penalty_rate = float(np.sum(jumps * (rh - ps.speeds[inside][shocks]) ** 2))
        else:
            acc.shift_penalty_rate = 0.0
    else:
        acc.shift_penalty_rate = 0.0

    k0 = int(np.searchsorted(pp, lo, side="right"))
    u0 = us.states[int(np.searchsorted(pu, lo, side="right"))]
    flux_left = levels[k0] * (relative_flux(u0, ps.states[k0], gas) - s * relative_entropy(u0, ps.states[k0], gas))
    k1 = int(np.searchsorted(pp, hi, side="left"))
    u1 = us.states[int(np.searchsorted(pu, hi, side="left"))]
    flux_right = levels[k1] * (-relative_flux(u1, ps.states[k1], gas) - s * relative_entropy(u1, ps.states[k1], gas))
    rates["boundary"] = float(flux_left + flux_right)
    acc.max_boundary_flux = max(acc.max_boundary_flux, float(flux_left), float(flux_right))

    interior = np.nonzero((pu > lo) & (pu < hi) & ~np.isin(pu, pp))[0]
    if interior.size:
        cells = np.searchsorted(pp, pu[interior], side="right")
        base = ps.states[cells]
        a = levels[cells]
        u_left, u_right = us.states[interior], us.states[interior + 1]
        speeds = us.speeds[interior]
        production = a * (
            relative_flux(u_right, base, gas)
            - relative_flux(u_left, base, gas)
            - speeds * (relative_entropy(u_right, base, gas) - relative_entropy(u_left, base, gas))
        )
        rates["reference"] = float(np.sum(production))
        kinds = [us.kinds[j] for j in interior]
        if all(kind in FRONT_KINDS for kind in kinds):
            jumps = np.linalg.norm(u_right - u_left, axis=1)
            scale = np.where(np.array(kinds) == NON_PHYSICAL, lambda_hat, nu)
            allowance = LOCAL_ALLOWANCE_FACTOR * a * scale * jumps
            per_cell = np.zeros(len(ps.states))
            np.add.at(per_cell, cells, production - allowance)
            bad = np.nonzero(per_cell > 1e-14)[0]
            acc.n_local += len(bad)
            for k in bad[: max(_MAX_REPORTED - len(acc.local), 0)]:
                acc.local.append(f"t={when:.9g}: reference production exceeds allowance by {per_cell[k]:.3e} in cell {k}")
    return rates


def quadrilateral_audit(
    u: PiecewiseConstantSolution,
    psi: TrajectoryRecord,
    *,
    R: float,
    tau: float,
    s: float,
    gas: GasParameters,
    kappa: float,
    c1: float,
    j: float,
    t_start: float | None = None,
) -> Ledger:
    """Sum the weighted relative-entropy balance over every quadrilateral of the cone.

    The cone is bounded by ``-R + s (t - tau)`` and ``R - s (t - tau)``.
    Slabs are delimited by the change times of both solutions, sub-slabs by
    every crossing of a reference jump with a ``psi`` front or a cone edge
    and of a ``psi`` front with a cone edge; every rate is constant on a
    sub-slab, so the ledger is integrated exactly.

    Raises:
        UsageError: If ``tau`` is not inside the time range of ``psi``.
    """
    t0 = psi.t_start if t_start is None else t_start
    if not t0 < tau <= psi.t_final + 1e-12:
        raise UsageError(f"tau={tau} must lie in ({t0}, {psi.t_final}]")

    def cone(t: float) -> tuple[float, float]:
        return -R + s * (t - tau), R - s * (t - tau)

    breaks = sorted({t0, tau} | {t for t in [*u.change_times(), *psi.change_times()] if t0 < t < tau})
    acc = _LedgerState(buckets={name: 0.0 for name in LEDGER_BUCKETS})
    slab_violations: list[str] = []
    np_sup = 0.0
    initial = terminal = 0.0
    previous_end: float | None = None
    nu, lambda_hat = psi.params.nu, psi.params.lambda_hat

    for a, b in zip(breaks, breaks[1:]):
        us, ps = u.snapshot(a, "+"), psi.snapshot(a, "+")
        levels = build_weight(psi.profile_at(a, "+"), kappa, c1, gas, j).levels
        np_sup = max(np_sup, float(np.sum(ps.strengths[np.array(ps.kinds) == NON_PHYSICAL])) if ps.kinds else 0.0)
        start = _energy(us, ps, levels, 0.0, cone(a), gas)
        if previous_end is None:
            initial = start
        else:
            acc.buckets["event_jumps"] += start - previous_end

        lo, hi = cone(a)
        span = b - a
        edges_x = np.array([lo, hi])
        edges_v = np.array([s, -s])
        offsets = np.concatenate(
            [
                _crossing_offsets(us.positions, us.speeds, ps.positions, ps.speeds, span),
                _crossing_offsets(us.positions, us.speeds, edges_x, edges_v, span),
                _crossing_offsets(ps.positions, ps.speeds, edges_x, edges_v, span),
            ]
        )
        cuts = np.unique(np.concatenate([[0.0, span], offsets]))
        integrated = 0.0
        for c, d in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (c + d)
            rates = _rates(us, ps, levels, mid, cone(a + mid), s, nu, lambda_hat, gas, acc, a + mid)
            for name, rate in rates.items():
                acc.buckets[name] += rate * (d - c)
                integrated += rate * (d - c)
            acc.shift_penalty += acc.shift_penalty_rate * (d - c)

        end = _energy(us, ps, levels, span, cone(b), gas)
        mismatch = abs(end - start - integrated)
        if mismatch > LEDGER_TOL * (1.0 + abs(start) + abs(integrated)):
            slab_violations.append(f"slab [{a:.9g}, {b:.9g}]: balance off by {mismatch:.3e}")
        previous_end = end
        terminal = end

    total = initial + sum(acc.buckets.values())
    identity_error = abs(terminal - total)
    m = nu + np_sup
    delta = terminal - initial
    k_required = (delta + math.sqrt(max(delta * delta + 4.0 * m * acc.shift_penalty, 0.0))) / (2.0 * m)
    ledger = Ledger(
        initial_energy=initial,
        terminal_energy=terminal,
        buckets=acc.buckets,
        shift_penalty=acc.shift_penalty,
        np_sup=np_sup,
        nu=nu,
        k_required=max(k_required, 0.0),
        identity_error=identity_error,
        slabs=len(breaks) - 1,
        quadrilaterals=acc.quadrilaterals,
        max_boundary_flux=acc.max_boundary_flux if acc.max_boundary_flux > -math.inf else 0.0,
        local_violations=tuple(acc.local),
        slab_violations=tuple(slab_violations[:_MAX_REPORTED]),
        n_local_violations=acc.n_local,
    )
    logger.info(
        "ledger over %d slabs: E(0)=%.6g E(tau)=%.6g K_required=%.4g",
        ledger.slabs,
        initial,
        terminal,
        ledger.k_required,
    )
    return ledger


# ---------------------------------------------------------------------------
# Front-level suites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RarefactionCheck:
    """Integrated rarefaction expression along ``x = x0 + v (t - t0)``.

    Attributes:
        ratio: ``value / (delta |u_L - u_R| t)``, the constant the bound needs.
    """

    value: float
    delta: float
    jump: float
    t: float
    v: float
    ratio: float

    def to_dict(self) -> dict:
        return {"value": self.value, "delta": self.delta, "jump": self.jump, "t": self.t, "v": self.v, "ratio": self.ratio}


def _rarefaction_integrand(
    u_minus: np.ndarray, u_plus: np.ndarray, u_left: State, u_right: State, v: float, gas: GasParameters
) -> float:
    return float(
        relative_flux(u_plus, u_right, gas)
        - relative_flux(u_minus, u_left, gas)
        - v * (relative_entropy(u_plus, u_right, gas) - relative_entropy(u_minus, u_left, gas))
    )


def rarefaction_dissipation_check(
    reference,
    fan: RarefactionFanSolution,
    v: float,
    t: float,
    gas: GasParameters,
) -> RarefactionCheck:
    """Integrate the rarefaction dissipation expression over ``[t0, t0 + t]``.

    Piecewise-constant references are integrated exactly along the line;
    others with Gauss-Legendre quadrature.

    Raises:
        UsageError: If *v* is outside the fan's speed range.
    """
    if not fan.speed_left - 1e-12 <= v <= fan.speed_right + 1e-12:
        raise UsageError(f"speed {v} outside the fan [{fan.speed_left}, {fan.speed_right}]")
    t0, x0 = fan.t0, fan.x0
    value = 0.0
    if hasattr(reference, "snapshot"):
        for a, b, left, right in line_traces(reference, x0, v, t0, t0 + t):
            value += (b - a) * _rarefaction_integrand(left, right, fan.u_left, fan.u_right, v, gas)
    else:
        nodes, weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)
        times = t0 + 0.5 * t * (nodes + 1.0)
        for time, weight in zip(times, weights):
            minus, plus = reference.traces(x0 + v * (time - t0), float(time))
            value += 0.5 * t * weight * _rarefaction_integrand(
                minus.as_array(), plus.as_array(), fan.u_left, fan.u_right, v, gas
            )
    jump = float(np.linalg.norm(fan.u_right.as_array() - fan.u_left.as_array()))
    delta = fan.delta
    ratio = value / (delta * jump * t) if delta * jump * t > 0.0 else 0.0
    return RarefactionCheck(value=value, delta=delta, jump=jump, t=t, v=v, ratio=ratio)


@dataclass(frozen=True)
class RarefactionSweep:
    """Rarefaction checks over fan strengths.

    Attributes:
        rows: ``(sigma, delta, max |value| / (|u_L - u_R| t), largest ratio)``.
        C: Smallest constant satisfying every check.
        fit: Log-log fit of the normalized value against ``delta``.
    """

    rows: tuple[tuple[float, float, float, float], ...]
    C: float
    fit: SlopeFit

    @property
    def passed(self) -> bool:
        return self.fit.slope >= 0.7

    def to_dict(self) -> dict:
        return {
            "name": "rarefaction",
            "passed": self.passed,
            "C": self.C,
            "fit": self.fit.to_dict(),
            "rows": [list(r) for r in self.rows],
        }


def rarefaction_delta_sweep(
    u_left: State,
    family: int,
    sigmas: Sequence[float],
    gas: GasParameters,
    *,
    t: float = 1.0,
    n_speeds: int = 5,
    reference_factory: Callable[[RarefactionFanSolution], object] | None = None,
) -> RarefactionSweep:
    """Run :func:`rarefaction_dissipation_check` over fans of the given strengths.

    The reference defaults to the exact fan itself.
    """
    rows = []
    worst_ratio = 0.0
    for sigma in sigmas:
        fan = RarefactionFanSolution.from_strength(u_left, family, float(sigma), gas)
        reference = fan if reference_factory is None else reference_factory(fan)
        checks = [
            rarefaction_dissipation_check(reference, fan, float(v), t, gas)
            for v in np.linspace(fan.speed_left, fan.speed_right, n_speeds)
        ]
        scale = max(abs(c.value) for c in checks) / (checks[0].jump * t)
        ratio = max(c.ratio for c in checks)
        worst_ratio = max(worst_ratio, ratio)
        rows.append((float(sigma), checks[0].delta, scale, ratio))
    fit = loglog_fit([r[1] for r in rows], [r[2] for r in rows])
    logger.info("rarefaction sweep: C=%.4g, slope=%.3f", worst_ratio, fit.slope)
    return RarefactionSweep(rows=tuple(rows), C=worst_ratio, fit=fit)


@dataclass(frozen=True)
class SuiteReport:
    name: str
    passed: bool
    n_samples: int
    n_positive: int
    constant: float
    worst: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "n_positive": self.n_positive,
            "constant": self.constant,
            "worst": self.worst,
            "details": self.details,
        }


def contact_dissipation_suite(
    box: StateBox,
    gas: GasParameters,
    n_samples: int = 1000,
    radius: float = 0.02,
    seed: int = 0,
    tol: float = 1e-12,
) -> SuiteReport:
    """Dissipation at stationary contacts weighted by the temperatures ``(theta_L, theta_R)``.

    Traces are those of a solution with a stationary front: ``u+`` shares
    velocity and pressure with ``u-`` (or equals it).
    """
    rng = np.random.default_rng(seed)
    bases = box.sample(rng, n_samples)
    positive = 0
    worst = -math.inf
    checked = 0
    for k, base in enumerate(bases):
        left = State.from_array(base)
        sigma = float(rng.uniform(-radius, radius))
        try:
            right = contact_curve(left, sigma, gas, box).state
            u_minus = State.from_array(base + rng.uniform(-radius, radius, 3) * box.widths)
            if k % 2:
                u_plus = u_minus
            else:
                tau = u_minus.tau * (1.0 + float(rng.uniform(-radius, radius)))
                u_plus = state_from_primitive(tau, u_minus.w, pressure(u_minus, gas), gas)
        except FrontlabError:
            continue
        value = float(
            dissipation_value(
                u_minus, u_plus, left, right, temperature(left, gas), temperature(right, gas), 0.0, gas
            )
        )
        checked += 1
        worst = max(worst, value)
        if value > tol:
            positive += 1
    return SuiteReport(
        "contact_dissipation", positive == 0, checked, positive, 0.0, worst if checked else 0.0
    )


def collect_shock_samples(
    u,
    psi: TrajectoryRecord,
    times: Iterable[float],
    gas: GasParameters,
    *,
    kappa: float,
    c1: float,
    j: float,
) -> list[DissipationSample]:
    """Dissipation at every shock of *psi* against the traces of *u* at the given times."""
    samples = []
    for t in times:
        profile = psi.profile_at(t)
        weight = build_weight(profile, kappa, c1, gas, j)
        for index, front in enumerate(profile.fronts):
            if front.kind != SHOCK:
                continue
            a_left, a_right = weight.sides(index)
            samples.append(
                dissipation_at_front(u.traces(front.position, t), front, a_left, a_right, front.speed, gas, t)
            )
    return samples


def shock_dissipation_suite(samples: Sequence[DissipationSample], min_shift: float = 0.0) -> SuiteReport:
    """Calibrate ``K`` in ``D <= -K a_R s0 (h' - rh)**2`` over the samples.

    Samples whose speed differs from the Rankine-Hugoniot speed by at most
    *min_shift* only need ``D <= 0``.
    """
    constants = []
    positive = 0
    for sample in samples:
        if abs(sample.h_dot - sample.rh) > min_shift and sample.shift_penalty > 0.0:
            constants.append(-sample.D / sample.shift_penalty)
        elif sample.D > 1e-12:
            positive += 1
    k = min(constants, default=math.inf)
    passed = positive == 0 and (not constants or k > 0.0)
    worst = max((s.D for s in samples), default=0.0)
    return SuiteReport("shock_dissipation", passed, len(samples), positive, k, worst, {"shifted": len(constants)})


# ---------------------------------------------------------------------------
# Hölder experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderSettings:
    """Inputs of the stability experiment.

    Attributes:
        perturbations: Amplitudes of the bump added to the initial data.
        R: Half-width of the terminal window.
        tau: Terminal time.
        component: Perturbed conserved component.
        grid_n: Grid resolution of the information speed.
    """

    perturbations: tuple[float, ...]
    R: float
    tau: float
    kappa: float
    c1: float
    kappa1: float
    kappa2: float
    component: int = 1
    grid_n: int = 9
    alpha: float | None = None


@dataclass(frozen=True)
class HolderRow:
    perturbation: float
    l2_initial: float
    l2_terminal: float
    l1_terminal: float
    linf_terminal: float
    l1_u_psi: float
    l2_u_psi: float
    l1_psi_v: float
    phi_v_psi: float
    shock_mass: float
    shift_square: float
    shift_abs: float
    ledger: dict
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def csv_row(self) -> list:
        return [
            self.perturbation,
            self.l2_initial,
            self.l2_terminal,
            self.l1_terminal,
            self.phi_v_psi,
            self.shift_abs,
            self.ledger["K_required"],
            self.passed,
        ]


HOLDER_CSV_HEADER: tuple[str, ...] = (
    "perturbation",
    "l2_initial",
    "l2_terminal",
    "l1_terminal",
    "phi_v_psi",
    "shift_abs",
    "ledger_K",
    "passed",
)


@dataclass(frozen=True)
class HolderContext:
    """Everything a single ladder cell needs; picklable for process pools."""

    data: object
    box: StateBox
    gas: GasParameters
    params: SchemeParameters
    settings: HolderSettings
    window: ShiftWindow
    s: float
    v: TrajectoryRecord


@dataclass(frozen=True)
class HolderResult:
    rows: tuple[HolderRow, ...]
    s: float
    fit: SlopeFit | None
    K: float

    @property
    def exponent_ok(self) -> bool:
        """A fit exists and its slope reaches the stability exponent within tolerance."""
        return self.fit is not None and self.fit.slope >= STABILITY_EXPONENT - STABILITY_EXPONENT_TOL

    @property
    def passed(self) -> bool:
        return self.exponent_ok and all(row.passed for row in self.rows)

    def to_dict(self) -> dict:
        return {
            "name": "holder",
            "passed": self.passed,
            "exponent_ok": self.exponent_ok,
            "s": self.s,
            "K": self.K,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "rows": [
                {
                    "perturbation": r.perturbation,
                    "l2_initial": r.l2_initial,
                    "l2_terminal": r.l2_terminal,
                    "l1_terminal": r.l1_terminal,
                    "linf_terminal": r.linf_terminal,
                    "l1_u_psi": r.l1_u_psi,
                    "l2_u_psi": r.l2_u_psi,
                    "l1_psi_v": r.l1_psi_v,
                    "phi_v_psi": r.phi_v_psi,
                    "shock_mass": r.shock_mass,
                    "shift_square": r.shift_square,
                    "shift_abs": r.shift_abs,
                    "ledger": r.ledger,
                    "checks": r.checks,
                }
                for r in self.rows
            ],
        }


def shift_integrals(psi: TrajectoryRecord, t1: float, gas: GasParameters) -> tuple[float, float, float]:
    """``int sum_shocks |[psi]|``, ``... |rh - h'|**2`` and ``... |rh - h'|`` over ``[t_start, t1]``."""
    times = sorted({psi.t_start, t1} | {t for t in psi.change_times() if psi.t_start < t < t1})
    mass = square = absolute = 0.0
    for a, b in zip(times, times[1:]):
        sl = psi.snapshot(a, "+")
        shocks = np.array([kind == SHOCK for kind in sl.kinds], dtype=bool)
        if not np.any(shocks):
            continue
        left, right = sl.states[:-1][shocks], sl.states[1:][shocks]
        jumps = np.linalg.norm(right - left, axis=1)
        gap = np.abs(_rh_speeds(left, right, sl.families[shocks], gas) - sl.speeds[shocks])
        mass += (b - a) * float(np.sum(jumps))
        square += (b - a) * float(np.sum(jumps * gap**2))
        absolute += (b - a) * float(np.sum(jumps * gap))
    return mass, square, absolute


def _stage(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except FrontlabError as exc:
        raise StageError(name, exc) from exc


def holder_cell(context: HolderContext, perturbation: float) -> HolderRow:
    """One rung of the perturbation ladder.

    ``u`` and the trace-driven ``psi`` are both tracked at ``context.params.nu``,
    the same fine ``nu`` as the unperturbed run ``v``.
    """
    settings, gas, box, params = context.settings, context.gas, context.box, context.params
    tau, R, s = settings.tau, settings.R, context.s
    a, b = getattr(context.data, "interval", (-1.0, 1.0))
    data = _stage("perturbation", perturbed, context.data, perturbation, settings.component)
    u0 = _stage("perturbation", discretize_initial, data, box, params.nu, gas, interval=(a, b))
    u = _stage("reference", evolve, u0, tau, params, gas)
    v = context.v
    policy = TraceDriven(u, context.window, gas)
    psi = _stage("shifting", evolve, v.profile_at(v.t_start), tau, params, gas, policy)
    j = box.weight_constant(gas)
    ledger = _stage(
        "dissipation", quadrilateral_audit, u, psi, R=R, tau=tau, s=s, gas=gas, kappa=settings.kappa, c1=settings.c1, j=j
    )

    def assemble() -> HolderRow:
        start = v.t_start
        inner, outer = (-R, R), (-R - s * (tau - start), R + s * (tau - start))
        u_end, v_end, psi_end = u.profile_at(tau), v.profile_at(tau), psi.profile_at(tau)
        l2_initial = l2_distance(u.profile_at(start), v.profile_at(start), outer)
        l2_terminal = l2_distance(u_end, v_end, inner)
        l1_terminal = l1_norm_distance(u_end, v_end, inner)
        linf_terminal = linf_distance(u_end, v_end, inner)
        l1_u_psi = l1_norm_distance(u_end, psi_end, inner)
        l2_u_psi = l2_distance(u_end, psi_end, inner)
        l1_psi_v = l1_norm_distance(psi_end, v_end, inner)
        phi_v_psi = phi(v_end, psi_end, inner, settings.kappa1, settings.kappa2, gas)
        mass, square, absolute = shift_integrals(psi, tau, gas)
        slack = 1e-12
        checks = {
            "ledger_balanced": ledger.balanced,
            "cauchy_schwarz": absolute <= math.sqrt(mass * square) * (1.0 + slack) + slack,
            "triangle": l1_terminal <= l1_u_psi + l1_psi_v + slack,
            "l2_in_l1": l1_u_psi <= math.sqrt(2.0 * R) * l2_u_psi * (1.0 + slack) + slack,
            "interpolation": l2_terminal <= math.sqrt(l1_terminal * linf_terminal) * (1.0 + slack) + slack,
        }
        return HolderRow(
            perturbation=perturbation,
            l2_initial=l2_initial,
            l2_terminal=l2_terminal,
            l1_terminal=l1_terminal,
            linf_terminal=linf_terminal,
            l1_u_psi=l1_u_psi,
            l2_u_psi=l2_u_psi,
            l1_psi_v=l1_psi_v,
            phi_v_psi=phi_v_psi,
            shock_mass=mass,
            shift_square=square,
            shift_abs=absolute,
            ledger=ledger.to_dict(),
            checks=checks,
        )

    return _stage("assembly", assemble)


def prepare_holder(
    data,
    box: StateBox,
    gas: GasParameters,
    params: SchemeParameters,
    settings: HolderSettings,
) -> HolderContext:
    """Unperturbed run, information speed and shift window shared by every rung."""
    interval = getattr(data, "interval", (-1.0, 1.0))
    v0 = _stage("reference", discretize_initial, data, box, params.nu, gas, interval=interval)
    v = _stage("reference", evolve, v0, settings.tau, params, gas)
    speed = _stage("info_speed", info_speed, box, box.grid(settings.grid_n), gas, params.lambda_hat, settings.grid_n)
    window = _stage("shifting", ShiftWindow.for_box, box, gas, params.lambda_hat, settings.alpha)
    return HolderContext(data, box, gas, params, settings, window, speed.s, v)


def holder_experiment(
    data,
    box: StateBox,
    gas: GasParameters,
    params: SchemeParameters,
    settings: HolderSettings,
    *,
    mapper: Callable = map,
) -> HolderResult:
    """Terminal ``L2`` distance against initial ``L2`` distance over the perturbation ladder.

    Raises:
        StageError: Naming the failing stage (``reference``, ``info_speed``,
            ``perturbation``, ``shifting``, ``dissipation`` or ``assembly``).
    """
    context = prepare_holder(data, box, gas, params, settings)
    rows = tuple(mapper(holder_cell, [context] * len(settings.perturbations), settings.perturbations))
    nonzero = [r for r in rows if r.l2_initial > 0.0 and r.l2_terminal > 0.0]
    fit = loglog_fit([r.l2_initial for r in nonzero], [r.l2_terminal for r in nonzero]) if len(nonzero) >= 2 else None
    k = max((r.l2_terminal / math.sqrt(r.l2_initial) for r in rows if r.l2_initial > 0.0), default=0.0)
    if fit is not None:
        logger.info("stability exponent %.3f (CI %.3f..%.3f), K=%.4g", fit.slope, fit.ci_low, fit.ci_high, k)
    return HolderResult(rows=rows, s=context.s, fit=fit, K=k)


@dataclass(frozen=True)
class NuRefinement:
    """Change of the terminal ``L2`` distance between consecutive ``nu`` rungs.

    ``changes[k]`` compares rung ``nus[k]`` with the next finer one and is
    the largest change over the perturbation ladder.
    """

    nus: tuple[float, ...]
    changes: tuple[float, ...]
    C: float
    fit: SlopeFit | None

    @property
    def passed(self) -> bool:
        # Fewer than two positive changes leave nothing to fit.
        return self.fit is None or self.fit.slope >= NU_REFINEMENT_ORDER - NU_REFINEMENT_TOL

    def to_dict(self) -> dict:
        return {
            "name": "nu_refinement",
            "passed": self.passed,
            "nus": list(self.nus),
            "changes": list(self.changes),
            "C": self.C,
            "fit": None if self.fit is None else self.fit.to_dict(),
        }


def nu_refinement(results: dict[float, HolderResult]) -> NuRefinement:
    """Fit the terminal-distance change between ``nu`` rungs against ``nu``.

    Raises:
        UsageError: If the rungs were run over different perturbation ladders.
    """
    nus = tuple(sorted(results, reverse=True))
    changes = []
    for coarse, finer in zip(nus, nus[1:]):
        a, b = results[coarse].rows, results[finer].rows
        if [r.perturbation for r in a] != [r.perturbation for r in b]:
            raise UsageError(f"nu rungs {coarse:g} and {finer:g} use different perturbation ladders")
        changes.append(max((abs(x.l2_terminal - y.l2_terminal) for x, y in zip(a, b)), default=0.0))
    c = max((change / nu for change, nu in zip(changes, nus)), default=0.0)
    try:
        fit = nu_sweep_slope(dict(zip(nus, changes)))
    except UsageError:
        fit = None
    if fit is not None:
        logger.info("terminal distance converges with order %.3f in nu, C=%.4g", fit.slope, c)
    return NuRefinement(nus=nus, changes=tuple(changes), C=c, fit=fit)
