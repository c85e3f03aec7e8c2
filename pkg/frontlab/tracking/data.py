"""Initial data families for front-tracking runs."""

from __future__ import annotations

import bisect
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from frontlab.config import DataSection
from frontlab.errors import ConfigurationError
from frontlab.models import State, StateBox


@dataclass(frozen=True)
class StepData:
    """Right-continuous piecewise-constant data.

    Attributes:
        jumps: Increasing jump locations.
        values: ``len(jumps) + 1`` states, left to right.
        interval: Support interval used for sampling.
    """

    jumps: tuple[float, ...]
    values: tuple[State, ...]
    interval: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self) -> None:
        if len(self.values) != len(self.jumps) + 1:
            raise ConfigurationError("step data need one more value than jumps")
        if any(b <= a for a, b in zip(self.jumps, self.jumps[1:])):
            raise ConfigurationError("jump locations must be strictly increasing")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.jumps

    def __call__(self, x: float) -> State:
        return self.values[bisect.bisect_right(self.jumps, x)]

    def total_variation(self) -> float:
        return float(
            sum(np.linalg.norm(b.as_array() - a.as_array()) for a, b in zip(self.values, self.values[1:]))
        )


@dataclass(frozen=True)
class BumpData:
    """Smooth ``sin**2`` bump of one conserved component on top of a base function."""

    base: Callable[[float], State]
    amplitude: float
    component: int = 1
    center: float = 0.0
    width: float = 1.0
    interval: tuple[float, float] = (-1.0, 1.0)
    breakpoints: tuple[float, ...] = field(default=())

    def __call__(self, x: float) -> State:
        vec = self.base(x).as_array()
        offset = x - (self.center - 0.5 * self.width)
        if 0.0 <= offset <= self.width:
            vec[self.component] += self.amplitude * math.sin(math.pi * offset / self.width) ** 2
        return State.from_array(vec)


def perturbed(data: Callable[[float], State], amplitude: float, component: int = 1) -> Callable[[float], State]:
    """*data* plus a bump of height *amplitude* over the middle half of its interval."""
    if amplitude == 0.0:
        return data
    a, b = getattr(data, "interval", (-1.0, 1.0))
    return BumpData(
        base=data,
        amplitude=amplitude,
        component=component,
        center=0.5 * (a + b),
        width=0.5 * (b - a),
        interval=(a, b),
        breakpoints=tuple(getattr(data, "breakpoints", ())),
    )


def constant_data(state: State, interval: tuple[float, float] = (-1.0, 1.0)) -> StepData:
    return StepData(jumps=(), values=(state,), interval=interval)


def riemann_data(left: State, right: State, x0: float = 0.0, interval: tuple[float, float] = (-1.0, 1.0)) -> StepData:
    return StepData(jumps=(x0,), values=(left, right), interval=interval)


def step_data(jumps: Sequence[float], values: Sequence[State], interval: tuple[float, float] = (-1.0, 1.0)) -> StepData:
    return StepData(jumps=tuple(jumps), values=tuple(values), interval=interval)


def random_step_data(
    reference: State,
    n_jumps: int,
    amplitude: float,
    rng: np.random.Generator,
    interval: tuple[float, float] = (-1.0, 1.0),
    box: StateBox | None = None,
) -> StepData:
    """Independent perturbations of *reference* of size at most *amplitude* per component.

    Jump locations are drawn uniformly in the middle half of *interval*.
    """
    a, b = interval
    inner = (a + 0.25 * (b - a), b - 0.25 * (b - a))
    jumps = np.sort(rng.uniform(*inner, size=n_jumps))
    base = reference.as_array()
    values = [reference]
    for _ in range(n_jumps):
        vec = base + amplitude * rng.uniform(-1.0, 1.0, size=3)
        state = State.from_array(vec)
        if box is not None:
            box.require(state, "random step value")
        values.append(state)
    values.append(reference)
    jumps = np.append(jumps, inner[1] + 0.125 * (b - a))
    return StepData(jumps=tuple(float(x) for x in jumps), values=tuple(values), interval=interval)


def build_initial_data(section: DataSection, box: StateBox, seed: int) -> StepData | BumpData:
    """Construct the configured initial data.

    Raises:
        ConfigurationError: If the chosen family lacks required parameters.
    """
    reference = box.reference if box.reference is not None else box.center()
    if section.kind == "constant":
        return constant_data(State(*section.left) if section.left else reference, section.interval)
    if section.kind == "riemann":
        if section.left is None or section.right is None:
            raise ConfigurationError("riemann data need data.left and data.right")
        return riemann_data(State(*section.left), State(*section.right), 0.5 * sum(section.interval), section.interval)
    if section.kind == "steps":
        if not section.jumps:
            raise ConfigurationError("steps data need data.jumps and data.values")
        return step_data(section.jumps, [State(*v) for v in section.values], section.interval)
    if section.kind == "bump":
        a, b = section.interval
        return BumpData(
            base=constant_data(reference, section.interval),
            amplitude=section.amplitude,
            component=section.component,
            center=0.5 * (a + b),
            width=0.5 * (b - a),
            interval=section.interval,
        )
    rng = np.random.default_rng(seed)
    return random_step_data(reference, section.n_jumps, section.amplitude, rng, section.interval, box)
