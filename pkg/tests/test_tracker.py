"""Unit tests for initial discretization and event-driven front tracking."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from frontlab.errors import InteractionCapExceeded, UsageError
from frontlab.models import NON_PHYSICAL, RAREFACTION, SHOCK, Front, GasParameters, Profile, State
from frontlab.physics.gas import flux
from frontlab.physics.waves import compose_waves, shock_curve, wave_curve
from frontlab.tracking.data import (
    BumpData,
    constant_data,
    perturbed,
    riemann_data,
    step_data,
)
from frontlab.tracking.shifts import ConstantOffset, ShiftWindow
from frontlab.tracking.solvers import accurate_solver, discretize_initial, in_small_bv_class, simplified_solver
from frontlab.tracking.tracker import SchemeParameters, evolve, rh_speed

GAS = GasParameters()
BASE = State(1.0, 0.0, 2.5)
NU = 0.01


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _params(box, **overrides) -> SchemeParameters:
    return SchemeParameters.for_box(box, GAS, NU, **overrides)


def _colliding_shocks() -> tuple[State, State, State]:
    """A 3-shock on the left heading into a 1-shock on the right."""
    middle = shock_curve(BASE, 3, -0.02, GAS).state
    right = shock_curve(middle, 1, -0.02, GAS).state
    return BASE, middle, right


def _integral(profile: Profile, a: float, b: float) -> np.ndarray:
    edges = np.concatenate([[a], np.clip(profile.positions, a, b), [b]])
    return np.sum(np.diff(edges)[:, None] * profile.state_array(), axis=0)


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------


class TestInitialData:
    """Data families and their piecewise-constant discretization."""

    def test_constant_data_has_no_fronts(self, box) -> None:
        profile = discretize_initial(constant_data(BASE), box, NU, GAS)
        assert len(profile) == 0
        assert profile.leftmost_state == BASE

    def test_single_shock_is_kept_exactly(self, box) -> None:
        right = shock_curve(BASE, 1, -0.05, GAS).state
        profile = discretize_initial(riemann_data(BASE, right, x0=0.1), box, NU, GAS)
        assert [f.kind for f in profile] == [SHOCK]
        assert profile.fronts[0].position == pytest.approx(0.1)
        assert profile.rightmost_state == right

    def test_rarefaction_split_into_steps(self, box) -> None:
        right = compose_waves(BASE, (0.0, 0.0, 0.045), GAS)
        profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
        assert all(f.kind == RAREFACTION for f in profile)
        assert len(profile) == 5
        assert all(f.strength <= NU * (1.0 + 1e-9) for f in profile)

    def test_smooth_data_within_nu(self, box) -> None:
        data = BumpData(base=constant_data(BASE), amplitude=0.05, component=1)
        profile = discretize_initial(data, box, NU, GAS)
        for x in np.linspace(-0.9, 0.9, 37):
            values = profile.state_at(float(x)).as_array()
            assert np.max(np.abs(values - data(float(x)).as_array())) <= NU + 1e-6

    def test_perturbed_zero_amplitude_is_identity(self) -> None:
        data = constant_data(BASE)
        assert perturbed(data, 0.0) is data
        bumped = perturbed(data, 0.01)
        assert bumped(0.0).w == pytest.approx(0.01)
        assert bumped(-0.9) == BASE

    def test_small_bv_class_membership(self, box) -> None:
        right = shock_curve(BASE, 1, -0.05, GAS).state
        profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
        tv = profile.total_variation()
        deviation = float(np.max(np.abs(right.as_array() - BASE.as_array())))
        assert tv == pytest.approx(float(np.linalg.norm(right.as_array() - BASE.as_array())))
        assert in_small_bv_class(profile, BASE, max(tv, deviation) + 1e-12)
        assert not in_small_bv_class(profile, BASE, 0.5 * tv)

    def test_step_data_validates_values(self) -> None:
        with pytest.raises(ValueError):
            step_data([0.0, 0.5], [BASE, BASE])


# ---------------------------------------------------------------------------
# Riemann solvers of the scheme
# ---------------------------------------------------------------------------


class TestSchemeSolvers:
    """Accurate and simplified interaction solvers."""

    def test_accurate_solver_chain(self, box) -> None:
        right = compose_waves(BASE, (-0.03, 0.02, 0.025), GAS)
        fronts = accurate_solver(BASE, right, NU, GAS, box=box, position=0.3)
        profile = Profile(time=0.0, leftmost_state=BASE, fronts=tuple(fronts))
        assert profile.rightmost_state == right
        assert all(f.position == 0.3 for f in fronts)
        assert [f.kind for f in fronts][:1] == [SHOCK]

    def test_equal_states_give_no_fronts(self, box) -> None:
        assert accurate_solver(BASE, BASE, NU, GAS, box=box) == []

    def test_simplified_solver_collects_residual(self, box) -> None:
        left, middle, right = _colliding_shocks()
        incoming = accurate_solver(left, middle, NU, GAS) + accurate_solver(middle, right, NU, GAS)
        fronts = simplified_solver(left, right, incoming, 5.0, GAS)
        profile = Profile(time=0.0, leftmost_state=left, fronts=tuple(fronts))
        assert profile.rightmost_state == right
        np_fronts = [f for f in fronts if f.kind == NON_PHYSICAL]
        assert len(np_fronts) <= 1
        assert all(f.speed == 5.0 for f in np_fronts)

    def test_simplified_solver_splits_merged_rarefaction(self) -> None:
        middle = wave_curve(BASE, 1, 0.8 * NU, GAS).state
        right = wave_curve(middle, 1, 0.8 * NU, GAS).state
        incoming = [
            Front(0, 0.0, -1.0, 1, RAREFACTION, BASE, middle, 0.8 * NU),
            Front(1, 0.0, -1.0, 1, RAREFACTION, middle, right, 0.8 * NU),
        ]
        fronts = simplified_solver(BASE, right, incoming, 5.0, GAS, nu=NU)
        rarefactions = [f for f in fronts if f.kind == RAREFACTION]
        assert len(rarefactions) == 2
        assert all(0.0 < f.sigma <= NU + 1e-12 for f in rarefactions)
        assert Profile(time=0.0, leftmost_state=BASE, fronts=tuple(fronts)).rightmost_state == right


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


class TestEvolution:
    """Event-driven evolution and its audits."""

    def test_single_shock_moves_at_its_speed(self, box) -> None:
        right = shock_curve(BASE, 3, -0.05, GAS).state
        profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
        traj = evolve(profile, 0.5, _params(box), GAS)
        assert traj.events == ()
        front = traj.profile_at(0.5).fronts[0]
        assert abs(front.position - 0.5 * rh_speed(front, GAS)) <= 0.5 * 0.1 * NU + 1e-9
        assert traj.audit_speeds(GAS) == []

    def test_initial_ids_follow_profile_order(self, box) -> None:
        right = compose_waves(BASE, (-0.03, 0.02, 0.025), GAS)
        profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
        traj = evolve(profile, 0.1, _params(box), GAS)
        assert [f.id for f in traj.profile_at(0.0)] == list(range(len(profile)))

    def test_collision_is_pairwise_and_accurate(self, box) -> None:
        left, middle, right = _colliding_shocks()
        data = step_data([-0.3, 0.3], [left, middle, right])
        traj = evolve(discretize_initial(data, box, NU, GAS), 1.0, _params(box), GAS)
        assert len(traj.events) >= 1
        assert traj.audit_pairwise() == []
        assert traj.audit_speeds(GAS) == []
        assert traj.profile_at(1.0).leftmost_state == left
        assert traj.profile_at(1.0).rightmost_state == right

    def test_conservation_up_to_scheme_error(self, box) -> None:
        left, middle, right = _colliding_shocks()
        data = step_data([-0.3, 0.3], [left, middle, right])
        t = 0.8
        traj = evolve(discretize_initial(data, box, NU, GAS), t, _params(box), GAS)
        before = _integral(traj.profile_at(0.0), -10.0, 10.0)
        after = _integral(traj.profile_at(t), -10.0, 10.0)
        expected = before + t * (flux(left, GAS) - flux(right, GAS))
        assert_allclose(after, expected, atol=2e-2)

    def test_seeded_runs_are_identical(self, box) -> None:
        left, middle, right = _colliding_shocks()
        profile = discretize_initial(step_data([-0.3, 0.3], [left, middle, right]), box, NU, GAS)
        first = evolve(profile, 1.0, _params(box, seed=7), GAS)
        second = evolve(profile, 1.0, _params(box, seed=7), GAS)
        assert first.to_dict([0.5, 1.0]) == second.to_dict([0.5, 1.0])

    def test_interaction_cap(self, box) -> None:
        left, middle, right = _colliding_shocks()
        profile = discretize_initial(step_data([-0.3, 0.3], [left, middle, right]), box, NU, GAS)
        with pytest.raises(InteractionCapExceeded) as info:
            evolve(profile, 1.0, _params(box, max_interactions=0), GAS)
        assert info.value.exit_code == 3

    def test_backwards_time_rejected(self, box) -> None:
        with pytest.raises(UsageError):
            evolve(Profile(time=1.0, leftmost_state=BASE), 0.5, _params(box), GAS)

    def test_shifted_shocks_stay_in_window(self, box) -> None:
        params = _params(box)
        window = ShiftWindow.for_box(box, GAS, params.lambda_hat)
        right = shock_curve(BASE, 3, -0.05, GAS).state
        profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
        traj = evolve(profile, 0.5, params, GAS, ConstantOffset(0.05, window))
        assert traj.is_shifted
        shock = next(r for r in traj.fronts.values() if r.kind == SHOCK)
        assert all(window.contains(3, s) for s in shock.speeds)
        assert shock.speeds[0] == pytest.approx(rh_speed(shock, GAS) + 0.05, abs=0.1 * NU)
        assert traj.audit_speeds(GAS) == []
