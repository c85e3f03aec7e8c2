"""frontlab data models: gas states, wave fronts and piecewise-constant profiles."""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

from frontlab.errors import DomainError, UsageError


# ---------------------------------------------------------------------------
# Front kinds & families
# ---------------------------------------------------------------------------

SHOCK: str = "shock"
RAREFACTION: str = "rarefaction_step"
CONTACT: str = "contact"
NON_PHYSICAL: str = "non_physical"

FRONT_KINDS: tuple[str, ...] = (SHOCK, RAREFACTION, CONTACT, NON_PHYSICAL)

#: Non-physical fronts are ordered after the three characteristic families.
NP_FAMILY: int = 4
FAMILIES: tuple[int, ...] = (1, 2, 3)

#: Tolerance used when checking that adjacent fronts share their states.
CHAIN_TOLERANCE: float = 1e-12


# ---------------------------------------------------------------------------
# Gas parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GasParameters:
    """Constants of a polytropic (gamma-law) gas.

    Attributes:
        gamma: Adiabatic exponent, ``gamma > 1``.
        r_bar: Gas constant, ``r_bar > 0``.
        k_bar: Entropy reference constant, ``k_bar > 0``.
        c_v: Specific heat at constant volume; derived as
            ``r_bar / (gamma - 1)`` when omitted.
    """

    gamma: float = 1.4
    r_bar: float = 1.0
    k_bar: float = 1.0
    c_v: float | None = None

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}", field="gamma")
        if not self.r_bar > 0.0:
            raise DomainError(f"r_bar must be positive, got {self.r_bar}", field="r_bar")
        if not self.k_bar > 0.0:
            raise DomainError(f"k_bar must be positive, got {self.k_bar}", field="k_bar")
        derived = self.r_bar / (self.gamma - 1.0)
        if self.c_v is None:
            object.__setattr__(self, "c_v", derived)
        elif not math.isclose(self.c_v, derived, rel_tol=1e-12):
            raise DomainError(
                f"c_v={self.c_v} is inconsistent with r_bar/(gamma-1)={derived}",
                field="c_v",
            )

    def to_dict(self) -> dict:
        """Return a JSON-serializable dictionary representation."""
        return {"gamma": self.gamma, "r_bar": self.r_bar, "k_bar": self.k_bar, "c_v": self.c_v}


# ---------------------------------------------------------------------------
# Conserved state
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class State:
    """Conserved Lagrangian state ``(tau, w, E)``.

    Attributes:
        tau: Specific volume, strictly positive.
        w: Velocity.
        energy: Total energy per unit mass; ``energy - w**2 / 2`` must be positive.
    """

    tau: float
    w: float
    energy: float

    def __post_init__(self) -> None:
        for name in ("tau", "w", "energy"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} is not finite", field=name)
        if self.tau <= 0.0:
            raise DomainError(f"specific volume must be positive, got {self.tau}", field="tau")
        if self.internal_energy <= 0.0:
            raise DomainError(
                f"internal energy must be positive, got {self.internal_energy}",
                field="internal_energy",
            )

    @property
    def internal_energy(self) -> float:
        return self.energy - 0.5 * self.w * self.w

    def as_array(self) -> np.ndarray:
        return np.array([self.tau, self.w, self.energy], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float] | np.ndarray) -> State:
        tau, w, energy = (float(v) for v in values)
        return cls(tau, w, energy)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "w": self.w, "E": self.energy}


def as_vector(u: State | Sequence[float] | np.ndarray) -> np.ndarray:
    """Return *u* as a float array with trailing dimension 3."""
    if isinstance(u, State):
        return u.as_array()
    return np.asarray(u, dtype=float)


@dataclass(frozen=True, slots=True)
class ThermoState:
    """Derived thermodynamic quantities of a :class:`State`."""

    pressure: float
    temperature: float
    entropy: float
    internal_energy: float

    def to_dict(self) -> dict:
        return {
            "p": self.pressure,
            "theta": self.temperature,
            "S": self.entropy,
            "internal_energy": self.internal_energy,
        }


# ---------------------------------------------------------------------------
# Working box
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateBox:
    """Compact coordinate box in ``(tau, w, E)`` state space.

    All states handled by an experiment live inside the box. Distances
    between states are measured in the box-normalized max-norm, in which the
    Riemann solvability threshold is expressed.

    Attributes:
        lower: Lower corner ``(tau, w, E)``.
        upper: Upper corner ``(tau, w, E)``.
        reference: Optional base state ``d`` of the small-BV class.
        epsilon: Optional radius of the small-BV class around ``reference``.
        solvability_threshold: Largest box-normalized distance at which the
            Riemann problem is attempted.
    """

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    reference: State | None = None
    epsilon: float | None = None
    solvability_threshold: float = 0.5

    def __post_init__(self) -> None:
        if len(self.lower) != 3 or len(self.upper) != 3:
            raise DomainError("box corners must have three components", field="box")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise DomainError(f"degenerate box {self.lower} .. {self.upper}", field="box")
        if self.lower[0] <= 0.0:
            raise DomainError("box must lie in tau > 0", field="tau")
        if self.reference is not None and not self.contains(self.reference):
            raise DomainError("reference state lies outside the box", field="box")

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) - np.asarray(self.lower, dtype=float)

    def contains(self, u: State | np.ndarray, tol: float = 0.0) -> bool:
        """Return ``True`` if *u* lies in the box, up to *tol* in normalized units."""
        vec = as_vector(u)
        lo = np.asarray(self.lower) - tol * self.widths
        hi = np.asarray(self.upper) + tol * self.widths
        return bool(np.all(vec >= lo) and np.all(vec <= hi))

    def require(self, u: State | np.ndarray, what: str = "state") -> None:
        if not self.contains(u):
            raise DomainError(f"{what} {as_vector(u).tolist()} lies outside the working box", field="box")

    def distance(self, u: State | np.ndarray, v: State | np.ndarray) -> float:
        """Box-normalized max-norm distance between two states."""
        return float(np.max(np.abs(as_vector(u) - as_vector(v)) / self.widths))

    def theta_floor(self, gas: GasParameters) -> float:
        """Infimum of the temperature over the box."""
        w_sq = max(self.lower[1] ** 2, self.upper[1] ** 2)
        internal = self.lower[2] - 0.5 * w_sq
        if internal <= 0.0:
            raise DomainError("box reaches non-positive internal energy", field="internal_energy")
        return internal / gas.c_v

    def weight_constant(self, gas: GasParameters) -> float:
        """``J``: half the temperature floor, used by the contact weight increment."""
        return 0.5 * self.theta_floor(gas)

    def center(self) -> State:
        return State.from_array(0.5 * (np.asarray(self.lower) + np.asarray(self.upper)))

    def grid(self, n: int) -> np.ndarray:
        """Return an ``(n**3, 3)`` array of tensor-grid nodes, corners included."""
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        return nodes[nodes[:, 2] - 0.5 * nodes[:, 1] ** 2 > 0.0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw *n* uniform physical states from the box."""
        out: list[np.ndarray] = []
        while len(out) < n:
            draw = rng.uniform(self.lower, self.upper, size=(2 * n, 3))
            out.extend(draw[draw[:, 2] - 0.5 * draw[:, 1] ** 2 > 0.0])
        return np.asarray(out[:n])

    def to_dict(self) -> dict:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "reference": None if self.reference is None else self.reference.to_dict(),
            "epsilon": self.epsilon,
            "solvability_threshold": self.solvability_threshold,
        }


# ---------------------------------------------------------------------------
# Fronts & profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Front:
    """A single jump of a piecewise-constant profile.

    Attributes:
        id: Identifier, stable for the front's lifetime (``-1`` when unassigned).
        position: Location of the jump.
        speed: Propagation speed.
        family: Characteristic family ``1..3``, or ``4`` for non-physical fronts.
        kind: One of :data:`FRONT_KINDS`.
        left_state: State immediately to the left.
        right_state: State immediately to the right.
        sigma: Signed wave parameter; for non-physical fronts the jump size.
    """

    id: int
    position: float
    speed: float
    family: int
    kind: str
    left_state: State
    right_state: State
    sigma: float

    def __post_init__(self) -> None:
        if self.kind not in FRONT_KINDS:
            raise UsageError(f"unknown front kind '{self.kind}'")
        if self.family not in (*FAMILIES, NP_FAMILY):
            raise UsageError(f"unknown family {self.family}")
        if (self.kind == NON_PHYSICAL) != (self.family == NP_FAMILY):
            raise UsageError("non-physical fronts and family 4 go together")

    @property
    def strength(self) -> float:
        return abs(self.sigma)

    @property
    def jump(self) -> float:
        """Euclidean size ``|u_R - u_L|`` of the state jump."""
        return float(np.linalg.norm(self.right_state.as_array() - self.left_state.as_array()))

    @property
    def is_shock(self) -> bool:
        return self.kind == SHOCK

    @property
    def is_physical(self) -> bool:
        return self.kind != NON_PHYSICAL

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "position": self.position,
            "speed": self.speed,
            "family": self.family,
            "kind": self.kind,
            "sigma": self.sigma,
            "left_state": self.left_state.to_dict(),
            "right_state": self.right_state.to_dict(),
        }


@dataclass(frozen=True)
class Profile:
    """Piecewise-constant function of ``x`` at a fixed time.

    Attributes:
        time: Time at which the profile is taken.
        leftmost_state: State to the left of every front.
        fronts: Fronts ordered by position (equal positions allowed for
            fronts that were just born at the same point).
    """

    time: float
    leftmost_state: State
    fronts: tuple[Front, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fronts", tuple(self.fronts))
        previous = self.leftmost_state
        last_x = -math.inf
        for front in self.fronts:
            if front.position < last_x - 1e-9:
                raise UsageError(
                    f"front {front.id} at {front.position} is left of its predecessor at {last_x}"
                )
            gap = np.max(np.abs(front.left_state.as_array() - previous.as_array()))
            if gap > CHAIN_TOLERANCE:
                raise UsageError(f"front {front.id} does not continue the state chain (gap {gap:.3e})")
            previous = front.right_state
            last_x = max(last_x, front.position)

    # --- access ---

    def __len__(self) -> int:
        return len(self.fronts)

    def __iter__(self) -> Iterator[Front]:
        return iter(self.fronts)

    @property
    def rightmost_state(self) -> State:
        return self.fronts[-1].right_state if self.fronts else self.leftmost_state

    @property
    def positions(self) -> np.ndarray:
        return np.array([f.position for f in self.fronts], dtype=float)

    def states(self) -> list[State]:
        """Return the ``n + 1`` constant values, left to right."""
        return [self.leftmost_state, *(f.right_state for f in self.fronts)]

    def state_array(self) -> np.ndarray:
        return np.array([s.as_array() for s in self.states()])

    def state_at(self, x: float, side: str = "+") -> State:
        """Return ``u(x+)`` (``side='+'``) or ``u(x-)`` (``side='-'``)."""
        mode = "right" if side == "+" else "left"
        index = int(np.searchsorted(self.positions, x, side=mode))
        return self.states()[index]

    # --- measures ---

    def total_variation(self) -> float:
        """Total variation of the profile, jumps at a shared position merged."""
        tv = 0.0
        k = 0
        n = len(self.fronts)
        while k < n:
            j = k
            while j + 1 < n and self.fronts[j + 1].position - self.fronts[k].position <= 1e-12:
                j += 1
            left = self.fronts[k].left_state.as_array()
            right = self.fronts[j].right_state.as_array()
            tv += float(np.linalg.norm(right - left))
            k = j + 1
        return tv

    def np_strength(self) -> float:
        return float(sum(f.strength for f in self.fronts if f.kind == NON_PHYSICAL))

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "leftmost_state": self.leftmost_state.to_dict(),
            "total_variation": self.total_variation(),
            "fronts": [f.to_dict() for f in self.fronts],
        }

    def to_slice(self) -> Slice:
        return Slice(
            positions=self.positions,
            speeds=np.array([f.speed for f in self.fronts], dtype=float),
            states=self.state_array(),
            kinds=tuple(f.kind for f in self.fronts),
            strengths=np.array([f.strength for f in self.fronts], dtype=float),
            families=np.array([f.family for f in self.fronts], dtype=int),
        )

    def csv_rows(self) -> list[list]:
        """Rows ``[id, x, speed, family, kind, sigma, tau_R, w_R, E_R]``."""
        return [
            [f.id, f.position, f.speed, f.family, f.kind, f.sigma,
             f.right_state.tau, f.right_state.w, f.right_state.energy]
            for f in self.fronts
        ]


@dataclass(frozen=True)
class Slice:
    """Array view of a piecewise-constant function at one instant.

    Attributes:
        positions: ``n`` non-decreasing jump locations.
        speeds: ``n`` jump speeds.
        states: ``(n + 1, 3)`` values, left to right.
        kinds: Front kind of every jump.
        strengths: ``|sigma|`` of every jump.
        families: Family of every jump (0 for jumps that are not waves).
    """

    positions: np.ndarray
    speeds: np.ndarray
    states: np.ndarray
    kinds: tuple[str, ...]
    strengths: np.ndarray
    families: np.ndarray

    def index(self, x: float | np.ndarray, side: str = "+") -> np.ndarray:
        """Index of the constant piece holding ``x+`` (or ``x-``)."""
        return np.searchsorted(self.positions, x, side="right" if side == "+" else "left")

    def values_at(self, x: float | np.ndarray, side: str = "+") -> np.ndarray:
        return self.states[self.index(x, side)]

    def advanced(self, dt: float) -> np.ndarray:
        """Jump positions after moving for *dt* at constant speed."""
        return self.positions + self.speeds * dt
