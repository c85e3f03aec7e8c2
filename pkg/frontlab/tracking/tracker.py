"""Event-driven front tracking.

Fronts move with constant speed between interactions. The next collision
between adjacent fronts is kept in a binary heap with lazy invalidation:
queue entries carry the speed versions of both fronts and are discarded
when either front died, changed speed or stopped being adjacent.

Each interaction involves exactly two fronts. It is resolved by the
accurate solver when both fronts are physical and the product of their
strengths is at least ``np_threshold``, otherwise by the simplified solver.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from frontlab.config import DEFAULT_KAPPA, DEFAULT_LAMBDA_HAT_FACTOR, DEFAULT_MAX_INTERACTIONS
from frontlab.errors import ConfigurationError, InteractionCapExceeded, UsageError
from frontlab.models import (
    CONTACT,
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
from frontlab.physics.gas import pressure, sound_speed_bounds
from frontlab.physics.waves import characteristic_speed
from frontlab.tracking.shifts import ShiftPolicy, ShiftWindow
from frontlab.tracking.solvers import accurate_solver, simplified_solver

logger = logging.getLogger(__name__)

ACCURATE: str = "accurate"
SIMPLIFIED: str = "simplified"


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeParameters:
    """Parameters of the nu-approximate scheme.

    Attributes:
        nu: Accuracy parameter; bounds rarefaction step strengths and speed errors.
        lambda_hat: Speed of non-physical fronts.
        kappa: Weight of the interaction potential in ``L + kappa Q``.
        np_threshold: Interactions with strength product below this go to the
            simplified solver; defaults to ``nu``.
        speed_jitter: Largest deterministic speed perturbation; defaults to ``nu / 10``.
        max_interactions: Hard cap on processed interactions.
        seed: Seed of the speed jitter.
    """

    nu: float
    lambda_hat: float
    kappa: float = DEFAULT_KAPPA
    np_threshold: float | None = None
    speed_jitter: float | None = None
    max_interactions: int = DEFAULT_MAX_INTERACTIONS
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.nu > 0.0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not self.lambda_hat > 0.0:
            raise ConfigurationError(f"lambda_hat must be positive, got {self.lambda_hat}")
        if self.kappa < 0.0:
            raise ConfigurationError(f"kappa must be non-negative, got {self.kappa}")
        if self.np_threshold is None:
            object.__setattr__(self, "np_threshold", self.nu)
        if self.speed_jitter is None:
            object.__setattr__(self, "speed_jitter", 0.1 * self.nu)
        if not 0.0 <= self.speed_jitter <= self.nu:
            raise ConfigurationError("speed_jitter must lie in [0, nu]")

    @classmethod
    def for_box(cls, box: StateBox, gas: GasParameters, nu: float, **overrides) -> SchemeParameters:
        """Parameters with ``lambda_hat`` defaulted from the box's largest sound speed."""
        _, c_max = sound_speed_bounds(box, gas)
        if overrides.get("lambda_hat") is None:
            overrides["lambda_hat"] = DEFAULT_LAMBDA_HAT_FACTOR * c_max
        params = cls(nu=nu, **overrides)
        params.check_box(box, gas)
        return params

    def check_box(self, box: StateBox, gas: GasParameters) -> None:
        _, c_max = sound_speed_bounds(box, gas)
        if self.lambda_hat <= c_max:
            raise ConfigurationError(
                f"lambda_hat={self.lambda_hat} must exceed the largest characteristic speed {c_max:.6g}"
            )

    def to_dict(self) -> dict:
        return {
            "nu": self.nu,
            "lambda_hat": self.lambda_hat,
            "kappa": self.kappa,
            "np_threshold": self.np_threshold,
            "speed_jitter": self.speed_jitter,
            "max_interactions": self.max_interactions,
            "seed": self.seed,
        }


def rh_speed(front: Front | FrontRecord, gas: GasParameters) -> float:
    """Rankine-Hugoniot speed of a shock (or a contact, which is stationary).

    Raises:
        UsageError: For rarefaction steps and non-physical fronts.
    """
    if front.kind == CONTACT:
        return 0.0
    if front.kind != SHOCK:
        raise UsageError(f"rh_speed needs a shock front, got {front.kind}")
    d_tau = front.right_state.tau - front.left_state.tau
    d_p = pressure(front.right_state, gas) - pressure(front.left_state, gas)
    if d_tau == 0.0:
        return characteristic_speed(front.left_state, front.family, gas)
    magnitude = math.sqrt(max(-d_p / d_tau, 0.0))
    return -magnitude if front.family == 1 else magnitude


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrontRecord:
    """Full history of one front.

    Attributes:
        segments: ``(t_start, x_start, speed)`` triples; a new segment starts
            whenever a shift policy changes the speed.
        natural_speed: Speed assigned by the Riemann solver before jitter and shift.
        parents: Ids of the two fronts whose interaction created this one
            (empty for initial fronts).
    """

    id: int
    family: int
    kind: str
    sigma: float
    left_state: State
    right_state: State
    natural_speed: float
    birth_time: float
    death_time: float
    segments: tuple[tuple[float, float, float], ...]
    parents: tuple[int, ...] = ()

    def _segment(self, t: float, side: str = "+") -> tuple[float, float, float]:
        starts = [seg[0] for seg in self.segments]
        index = bisect.bisect_right(starts, t) if side == "+" else bisect.bisect_left(starts, t)
        return self.segments[max(index - 1, 0)]

    def position_at(self, t: float) -> float:
        t_start, x_start, speed = self._segment(t)
        return x_start + speed * (t - t_start)

    def speed_at(self, t: float, side: str = "+") -> float:
        return self._segment(t, side)[2]

    @property
    def speeds(self) -> tuple[float, ...]:
        return tuple(seg[2] for seg in self.segments)

    @property
    def jump(self) -> float:
        return float(np.linalg.norm(self.right_state.as_array() - self.left_state.as_array()))

    def front_at(self, t: float, side: str = "+", position: float | None = None) -> Front:
        return Front(
            id=self.id,
            position=self.position_at(t) if position is None else position,
            speed=self.speed_at(t, side),
            family=self.family,
            kind=self.kind,
            left_state=self.left_state,
            right_state=self.right_state,
            sigma=self.sigma,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "kind": self.kind,
            "sigma": self.sigma,
            "natural_speed": self.natural_speed,
            "birth_time": self.birth_time,
            "death_time": None if math.isinf(self.death_time) else self.death_time,
            "segments": [list(seg) for seg in self.segments],
            "parents": list(self.parents),
            "left_state": self.left_state.to_dict(),
            "right_state": self.right_state.to_dict(),
        }


@dataclass(frozen=True)
class InteractionEvent:
    index: int
    time: float
    position: float
    incoming: tuple[int, int]
    outgoing: tuple[int, ...]
    solver: str
    np_created: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "time": self.time,
            "position": self.position,
            "incoming": list(self.incoming),
            "outgoing": list(self.outgoing),
            "solver": self.solver,
            "np_created": self.np_created,
        }


@dataclass(frozen=True)
class ShiftUpdate:
    """A speed change imposed by a re-evaluated shift policy."""

    time: float
    front_id: int
    old_speed: float
    new_speed: float

    def to_dict(self) -> dict:
        return {"time": self.time, "front_id": self.front_id, "old_speed": self.old_speed, "new_speed": self.new_speed}


@dataclass(frozen=True)
class _Snapshot:
    positions: np.ndarray
    states: tuple[State, ...]
    records: tuple[FrontRecord, ...]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Complete, immutable result of one evolution.

    Attributes:
        params: Scheme parameters of the run.
        t_start: Initial time.
        t_final: Final time.
        leftmost_state: State left of every front (constant in time).
        fronts: All front records by id.
        events: Interactions in processing order.
        orders: ``(time, ids)`` pairs; the left-to-right order of live
            fronts from ``time`` until the next entry.
        shift_updates: Speed changes imposed by the shift policy.
        shift: Description of the shift policy, ``None`` for un-shifted runs.
    """

    params: SchemeParameters
    t_start: float
    t_final: float
    leftmost_state: State
    fronts: dict[int, FrontRecord]
    events: tuple[InteractionEvent, ...]
    orders: tuple[tuple[float, tuple[int, ...]], ...]
    shift_updates: tuple[ShiftUpdate, ...] = ()
    shift: dict | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_shifted(self) -> bool:
        return self.shift is not None and self.shift.get("policy") != "none"

    @property
    def window(self) -> ShiftWindow | None:
        if self.shift is None or self.shift.get("window") is None:
            return None
        return ShiftWindow(**self.shift["window"])

    # --- time slicing ---

    def event_times(self) -> list[float]:
        return sorted({event.time for event in self.events})

    def _order_at(self, t: float, side: str) -> tuple[int, ...]:
        if t < self.t_start - 1e-12 or t > self.t_final + 1e-12:
            raise UsageError(f"time {t} outside [{self.t_start}, {self.t_final}]")
        starts = [entry[0] for entry in self.orders]
        index = bisect.bisect_right(starts, t) if side == "+" else bisect.bisect_left(starts, t)
        return self.orders[max(index - 1, 0)][1]

    def _snapshot(self, t: float, side: str = "+") -> _Snapshot:
        key = (t, side)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        records = tuple(self.fronts[i] for i in self._order_at(t, side))
        positions = np.array([r.position_at(t) for r in records], dtype=float)
        if len(positions):
            positions = np.maximum.accumulate(positions)
        states = (self.leftmost_state, *(r.right_state for r in records))
        snap = _Snapshot(positions=positions, states=states, records=records)
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = snap
        return snap

    def profile_at(self, t: float, side: str = "+") -> Profile:
        """Profile at time *t*; ``side='-'`` gives the configuration just before events at *t*."""
        snap = self._snapshot(t, side)
        fronts = tuple(
            record.front_at(t, side, position=float(x)) for record, x in zip(snap.records, snap.positions)
        )
        return Profile(time=t, leftmost_state=self.leftmost_state, fronts=fronts)

    def state_at(self, x: float, t: float, side: str = "+") -> State:
        snap = self._snapshot(t)
        mode = "right" if side == "+" else "left"
        return snap.states[int(np.searchsorted(snap.positions, x, side=mode))]

    def traces(self, x: float, t: float) -> tuple[State, State]:
        """One-sided traces ``(u(x-, t), u(x+, t))``."""
        snap = self._snapshot(t)
        left = int(np.searchsorted(snap.positions, x, side="left"))
        right = int(np.searchsorted(snap.positions, x, side="right"))
        return snap.states[left], snap.states[right]

    def snapshot(self, t: float, side: str = "+") -> Slice:
        """Array view of the profile at *t* with the speeds valid on *side* of *t*."""
        snap = self._snapshot(t, side)
        return Slice(
            positions=snap.positions,
            speeds=np.array([r.speed_at(t, side) for r in snap.records], dtype=float),
            states=np.array([s.as_array() for s in snap.states]),
            kinds=tuple(r.kind for r in snap.records),
            strengths=np.array([abs(r.sigma) for r in snap.records], dtype=float),
            families=np.array([r.family for r in snap.records], dtype=int),
        )

    def change_times(self) -> list[float]:
        """Times at which the front set or some speed changes."""
        return sorted({e.time for e in self.events} | {u.time for u in self.shift_updates})

    # --- audits ---

    def audit_pairwise(self, tol: float = 1e-12) -> list[str]:
        """Events where more than two fronts meet at one space-time point."""
        violations = []
        keys: dict[tuple[float, float], int] = {}
        for event in self.events:
            key = (round(event.time / tol) * tol, round(event.position / tol) * tol)
            if key in keys:
                violations.append(f"events {keys[key]} and {event.index} share the point t={event.time:.12g}, x={event.position:.12g}")
            keys[key] = event.index
            snap = self._snapshot(event.time, "-")
            for record, x in zip(snap.records, snap.positions):
                if record.id in event.incoming:
                    continue
                if abs(x - event.position) <= tol:
                    violations.append(f"front {record.id} passes through event {event.index}")
        return violations

    def audit_speeds(self, gas: GasParameters) -> list[str]:
        """Speed invariants: nu-accuracy when un-shifted, windows when shifted."""
        nu = self.params.nu
        window = self.window
        violations = []
        for record in self.fronts.values():
            if record.kind == NON_PHYSICAL:
                if any(s != self.params.lambda_hat for s in record.speeds):
                    violations.append(f"non-physical front {record.id} does not travel at lambda_hat")
                continue
            if record.kind == RAREFACTION:
                if record.sigma > nu * (1.0 + 1e-9):
                    violations.append(f"rarefaction step {record.id} has strength {record.sigma:.3e} > nu")
                reference = characteristic_speed(record.left_state, record.family, gas)
            else:
                reference = rh_speed(record, gas)
            for speed in record.speeds:
                accurate = abs(speed - reference) <= nu
                if record.kind == SHOCK and self.is_shifted and window is not None:
                    if not (accurate or window.contains(record.family, speed)):
                        violations.append(f"shifted shock {record.id} speed {speed:.6g} outside its window")
                elif not accurate:
                    violations.append(f"front {record.id} speed error {abs(speed - reference):.3e} > nu")
        return violations

    # --- series & export ---

    def to_dict(self, times: Sequence[float] = ()) -> dict:
        return {
            "params": self.params.to_dict(),
            "t_start": self.t_start,
            "t_final": self.t_final,
            "shift": self.shift,
            "leftmost_state": self.leftmost_state.to_dict(),
            "n_events": len(self.events),
            "events": [e.to_dict() for e in self.events],
            "shift_updates": [u.to_dict() for u in self.shift_updates],
            "fronts": [self.fronts[i].to_dict() for i in sorted(self.fronts)],
            "profiles": [self.profile_at(t).to_dict() for t in times],
        }


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


@dataclass
class _LiveFront:
    id: int
    family: int
    kind: str
    sigma: float
    left_state: State
    right_state: State
    natural_speed: float
    jitter: float
    birth_time: float
    parents: tuple[int, ...]
    segments: list[tuple[float, float, float]]
    version: int = 0

    @property
    def speed(self) -> float:
        return self.segments[-1][2]

    def position_at(self, t: float) -> float:
        t_start, x_start, speed = self.segments[-1]
        return x_start + speed * (t - t_start)

    def view(self, t: float, speed: float | None = None) -> Front:
        return Front(
            self.id,
            self.position_at(t),
            self.natural_speed if speed is None else speed,
            self.family,
            self.kind,
            self.left_state,
            self.right_state,
            self.sigma,
        )


class _Evolution:
    """Mutable state of one run; produces a :class:`TrajectoryRecord`."""

    def __init__(
        self,
        profile: Profile,
        t_final: float,
        params: SchemeParameters,
        gas: GasParameters,
        shift: ShiftPolicy | None,
    ) -> None:
        self.params = params
        self.gas = gas
        self.shift = shift
        self.t_start = profile.time
        self.t_final = t_final
        self.leftmost = profile.leftmost_state
        self.live: dict[int, _LiveFront] = {}
        self.dead: dict[int, FrontRecord] = {}
        self.right_of: dict[int | None, int | None] = {}
        self.left_of: dict[int | None, int | None] = {}
        self.head: int | None = None
        self.heap: list[tuple] = []
        self.counter = itertools.count()
        self.next_id = 0
        self.events: list[InteractionEvent] = []
        self.orders: list[tuple[float, tuple[int, ...]]] = []
        self.shift_updates: list[ShiftUpdate] = []
        self.initial_fronts = list(profile.fronts)

    # --- speeds ---

    def _jitter(self, front_id: int, kind: str, sigma: float) -> float:
        if kind == NON_PHYSICAL or self.params.speed_jitter == 0.0:
            return 0.0
        draw = float(np.random.default_rng([self.params.seed, front_id]).uniform(-1.0, 1.0))
        if kind == RAREFACTION:
            # One-sided so that steps of one fan keep their order.
            return abs(draw) * min(self.params.speed_jitter, 0.5 * abs(sigma))
        return draw * self.params.speed_jitter

    def _speed(self, live: _LiveFront, t: float) -> float:
        if live.kind == NON_PHYSICAL:
            return self.params.lambda_hat
        view = live.view(t)
        if self.shift is not None and self.shift.applies_to(view):
            return self.shift.imposed_speed(view, t, live.jitter)
        return live.natural_speed + live.jitter

    # --- bookkeeping ---

    def _spawn(self, front: Front, t: float, position: float, parents: tuple[int, ...]) -> int:
        front_id = self.next_id
        self.next_id += 1
        live = _LiveFront(
            id=front_id,
            family=front.family,
            kind=front.kind,
            sigma=front.sigma,
            left_state=front.left_state,
            right_state=front.right_state,
            natural_speed=front.speed,
            jitter=self._jitter(front_id, front.kind, front.sigma),
            birth_time=t,
            parents=parents,
            segments=[(t, position, 0.0)],
        )
        self.live[front_id] = live
        live.segments[0] = (t, position, self._speed(live, t))
        return front_id

    def _retire(self, front_id: int, t: float) -> None:
        live = self.live.pop(front_id)
        self.dead[front_id] = self._record(live, t)

    @staticmethod
    def _record(live: _LiveFront, death: float) -> FrontRecord:
        return FrontRecord(
            id=live.id,
            family=live.family,
            kind=live.kind,
            sigma=live.sigma,
            left_state=live.left_state,
            right_state=live.right_state,
            natural_speed=live.natural_speed,
            birth_time=live.birth_time,
            death_time=death,
            segments=tuple(live.segments),
            parents=live.parents,
        )

    def _order(self) -> tuple[int, ...]:
        out = []
        node = self.head
        while node is not None:
            out.append(node)
            node = self.right_of[node]
        return tuple(out)

    def _link(self, left: int | None, ids: Sequence[int], right: int | None) -> None:
        chain = [left, *ids, right]
        for a, b in zip(chain, chain[1:]):
            if a is None:
                self.head = b
            else:
                self.right_of[a] = b
            if b is not None:
                self.left_of[b] = a

    def _schedule(self, a: int | None, b: int | None, t: float) -> None:
        if a is None or b is None:
            return
        fa, fb = self.live[a], self.live[b]
        closing = fa.speed - fb.speed
        if closing <= 0.0:
            return
        gap = max(fb.position_at(t) - fa.position_at(t), 0.0)
        t_hit = t + gap / closing
        if t_hit <= self.t_final:
            heapq.heappush(self.heap, (t_hit, next(self.counter), a, b, fa.version, fb.version))

    def _reschedule_around(self, front_id: int, t: float) -> None:
        self._schedule(self.left_of.get(front_id), front_id, t)
        self._schedule(front_id, self.right_of.get(front_id), t)

    def _push_refresh(self, t: float) -> None:
        if self.shift is not None and self.shift.refresh_dt and t <= self.t_final:
            heapq.heappush(self.heap, (t, next(self.counter), None, None, 0, 0))

    def _refresh_shifts(self, t: float) -> None:
        changed = []
        for live in self.live.values():
            if live.kind != SHOCK or not self.shift.applies_to(live.view(t)):
                continue
            new_speed = self._speed(live, t)
            old_speed = live.speed
            if new_speed != old_speed:
                live.segments.append((t, live.position_at(t), new_speed))
                live.version += 1
                self.shift_updates.append(ShiftUpdate(t, live.id, old_speed, new_speed))
                changed.append(live.id)
        for front_id in changed:
            self._reschedule_around(front_id, t)
        if changed:
            logger.debug("shift policy changed %d speeds at t=%.6g", len(changed), t)

    # --- main loop ---

    def _interact(self, a: int, b: int, t: float) -> None:
        fa, fb = self.live[a], self.live[b]
        x = 0.5 * (fa.position_at(t) + fb.position_at(t))
        incoming = [fa.view(t), fb.view(t)]
        simplified = (
            fa.kind == NON_PHYSICAL
            or fb.kind == NON_PHYSICAL
            or abs(fa.sigma * fb.sigma) < self.params.np_threshold
        )
        if simplified:
            outgoing = simplified_solver(
                fa.left_state, fb.right_state, incoming, self.params.lambda_hat, self.gas, nu=self.params.nu, position=x
            )
        else:
            outgoing = accurate_solver(fa.left_state, fb.right_state, self.params.nu, self.gas, position=x)

        left, right = self.left_of.get(a), self.right_of.get(b)
        self._retire(a, t)
        self._retire(b, t)
        new_ids = [self._spawn(front, t, x, (a, b)) for front in outgoing]
        self._link(left, new_ids, right)
        self.right_of.pop(a, None)
        self.right_of.pop(b, None)
        self.left_of.pop(a, None)
        self.left_of.pop(b, None)

        self.events.append(
            InteractionEvent(
                index=len(self.events),
                time=t,
                position=x,
                incoming=(a, b),
                outgoing=tuple(new_ids),
                solver=SIMPLIFIED if simplified else ACCURATE,
                np_created=float(sum(f.strength for f in outgoing if f.kind == NON_PHYSICAL)),
            )
        )
        if self.shift is not None and self.shift.re_evaluate:
            self._refresh_shifts(t)
        self.orders.append((t, self._order()))

        if new_ids:
            self._schedule(left, new_ids[0], t)
            for p, q in zip(new_ids, new_ids[1:]):
                self._schedule(p, q, t)
            self._schedule(new_ids[-1], right, t)
        else:
            self._schedule(left, right, t)

    def run(self) -> TrajectoryRecord:
        ids = [self._spawn(front, self.t_start, front.position, ()) for front in self.initial_fronts]
        self._link(None, ids, None)
        self.orders.append((self.t_start, self._order()))
        for a, b in zip(ids, ids[1:]):
            self._schedule(a, b, self.t_start)
        if self.shift is not None and self.shift.refresh_dt:
            self._push_refresh(self.t_start + self.shift.refresh_dt)

        processed = 0
        while self.heap:
            t, _, a, b, version_a, version_b = heapq.heappop(self.heap)
            if t > self.t_final:
                break
            if a is None:
                self._refresh_shifts(t)
                self._push_refresh(t + self.shift.refresh_dt)
                continue
            fa, fb = self.live.get(a), self.live.get(b)
            if fa is None or fb is None or self.right_of.get(a) != b:
                continue
            if fa.version != version_a or fb.version != version_b:
                continue
            processed += 1
            if processed > self.params.max_interactions:
                raise InteractionCapExceeded(
                    f"more than {self.params.max_interactions} interactions before t={t:.6g}",
                    cap=self.params.max_interactions,
                    time=t,
                )
            self._interact(a, b, t)

        fronts = dict(self.dead)
        for front_id, live in self.live.items():
            fronts[front_id] = self._record(live, math.inf)
        logger.info(
            "evolved to t=%.6g: %d interactions, %d fronts alive",
            self.t_final,
            len(self.events),
            len(self.live),
        )
        return TrajectoryRecord(
            params=self.params,
            t_start=self.t_start,
            t_final=self.t_final,
            leftmost_state=self.leftmost,
            fronts=dict(sorted(fronts.items())),
            events=tuple(self.events),
            orders=tuple(self.orders),
            shift_updates=tuple(self.shift_updates),
            shift=None if self.shift is None else self.shift.to_dict(),
        )


def evolve(
    profile: Profile,
    t_final: float,
    params: SchemeParameters,
    gas: GasParameters,
    shift: ShiftPolicy | None = None,
) -> TrajectoryRecord:
    """Run the front-tracking scheme from *profile* up to *t_final*.

    Raises:
        UsageError: If ``t_final`` precedes the profile time.
        InteractionCapExceeded: If more than ``params.max_interactions``
            interactions occur.
    """
    if t_final < profile.time:
        raise UsageError(f"t_final={t_final} precedes the initial time {profile.time}")
    return _Evolution(profile, t_final, params, gas, shift).run()
