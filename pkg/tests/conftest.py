"""Shared fixtures: the default gas and working box."""

import numpy as np
import pytest
from hypothesis import strategies as st

from frontlab.config import RunConfig
from frontlab.models import GasParameters, State, StateBox


@pytest.fixture
def gas() -> GasParameters:
    return GasParameters()


@pytest.fixture
def box() -> StateBox:
    return RunConfig().state_box()


@pytest.fixture
def reference() -> State:
    return State(1.0, 0.0, 2.5)


def box_states(lower=(0.75, -0.25, 2.1), upper=(1.35, 0.25, 3.1)):
    """Hypothesis strategy for physical states strictly inside the default box."""
    return st.tuples(
        st.floats(lower[0], upper[0]),
        st.floats(lower[1], upper[1]),
        st.floats(lower[2], upper[2]),
    ).map(lambda t: State(*t))


def random_states(n: int, seed: int = 0) -> np.ndarray:
    return RunConfig().state_box().sample(np.random.default_rng(seed), n)
