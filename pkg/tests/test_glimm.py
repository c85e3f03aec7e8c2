"""Unit tests for the Glimm functional and the shock/contact weight."""

import pytest

from frontlab.errors import ConfigurationError
from frontlab.functionals.glimm import (
    KAPPA_SEARCH,
    build_weight,
    calibrate_c1,
    calibrate_kappa,
    check_ratios,
    glimm,
    glimm_series,
    shock_ratio_window,
    weight_bounds,
    weight_decay_audit,
)
from frontlab.models import CONTACT, Front, GasParameters, Profile, State
from frontlab.physics.gas import temperature
from frontlab.physics.waves import shock_curve, wave_curve
from frontlab.tracking.solvers import discretize_initial
from frontlab.tracking.data import step_data
from frontlab.tracking.tracker import SchemeParameters, evolve

GAS = GasParameters()
BASE = State(1.0, 0.0, 2.5)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _chain(*waves: tuple[int, float, float]) -> Profile:
    """Profile from ``(family, sigma, position)`` triples composed left to right."""
    fronts = []
    current = BASE
    for index, (family, sigma, x) in enumerate(waves):
        point = wave_curve(current, family, sigma, GAS)
        fronts.append(Front(index, x, point.speed, family, point.kind, current, point.state, sigma))
        current = point.state
    return Profile(time=0.0, leftmost_state=BASE, fronts=tuple(fronts))


# ---------------------------------------------------------------------------
# Glimm functional
# ---------------------------------------------------------------------------


class TestGlimm:
    """Wave strength, interaction potential and Upsilon."""

    def test_empty_profile(self) -> None:
        report = glimm(Profile(time=0.0, leftmost_state=BASE), 4.0)
        assert (report.L, report.Q, report.upsilon) == (0.0, 0.0, 0.0)

    def test_approaching_families(self) -> None:
        report = glimm(_chain((3, -0.02, -0.5), (1, -0.03, 0.5)), 4.0, with_pairs=True)
        assert report.L == pytest.approx(0.05)
        assert report.Q == pytest.approx(0.02 * 0.03)
        assert report.upsilon == pytest.approx(0.05 + 4.0 * 0.0006)
        assert report.pairs == ((0, 1, pytest.approx(0.0006)),)

    def test_separating_families(self) -> None:
        assert glimm(_chain((1, -0.02, -0.5), (3, -0.03, 0.5)), 4.0).Q == 0.0

    def test_same_family_shock_counts(self) -> None:
        report = glimm(_chain((1, -0.02, -0.5), (1, -0.01, 0.5)), 1.0)
        assert report.Q == pytest.approx(0.0002)

    def test_same_family_rarefactions_do_not_approach(self) -> None:
        assert glimm(_chain((3, 0.01, -0.5), (3, 0.01, 0.5)), 1.0).Q == 0.0


# ---------------------------------------------------------------------------
# Weight
# ---------------------------------------------------------------------------


class TestWeight:
    """Construction of the weight and its ratio constraints."""

    def test_levels_and_ratios(self, box) -> None:
        j = box.weight_constant(GAS)
        profile = _chain((1, -0.02, -0.6), (2, 0.03, -0.1), (3, -0.02, 0.3), (3, 0.01, 0.7))
        weight = build_weight(profile, 4.0, 1.0, GAS, j)
        assert weight.levels[0] == pytest.approx(1.0 + weight.upsilon)
        assert weight.weight_at(-5.0) == pytest.approx(weight.levels[0])
        assert check_ratios(weight, GAS).passed

        a_left, a_right = weight.sides(1)
        contact = profile.fronts[1]
        assert contact.kind == CONTACT
        expected = temperature(contact.right_state, GAS) / temperature(contact.left_state, GAS)
        assert a_right / a_left == pytest.approx(expected, rel=1e-12)

        a_left, a_right = weight.sides(3)
        assert a_left == a_right

    def test_shock_ratio_windows(self) -> None:
        assert shock_ratio_window(1, 1.0, 0.1) == pytest.approx((0.8, 0.95))
        assert shock_ratio_window(3, 1.0, 0.1) == pytest.approx((1.05, 1.2))

    def test_weight_decreases_across_1_shock(self, box) -> None:
        weight = build_weight(_chain((1, -0.02, 0.0)), 4.0, 1.0, GAS, box.weight_constant(GAS))
        lo, hi = weight_bounds(weight)
        assert weight.levels[1] < weight.levels[0]
        assert (lo, hi) == (weight.levels[1], weight.levels[0])

    def test_oversized_c1_rejected(self, box) -> None:
        with pytest.raises(ConfigurationError):
            build_weight(_chain((1, -0.02, 0.0)), 4.0, 1000.0, GAS, box.weight_constant(GAS))

    def test_calibrate_c1_halves_until_admissible(self, box) -> None:
        j = box.weight_constant(GAS)
        profile = _chain((1, -0.02, 0.0))
        result = calibrate_c1([profile], 4.0, GAS, j, start=1000.0)
        assert result.passed
        assert result.value < 1000.0
        assert result.tried[0] == 1000.0
        assert check_ratios(build_weight(profile, 4.0, result.value, GAS, j), GAS).passed


# ---------------------------------------------------------------------------
# Along trajectories
# ---------------------------------------------------------------------------


class TestTrajectoryAudits:
    """Glimm series and the kappa calibration on a shock collision."""

    @pytest.fixture
    def trajectory(self, box):
        middle = shock_curve(BASE, 3, -0.02, GAS).state
        right = shock_curve(middle, 1, -0.02, GAS).state
        profile = discretize_initial(step_data([-0.3, 0.3], [BASE, middle, right]), box, 0.01, GAS)
        return evolve(profile, 1.0, SchemeParameters.for_box(box, GAS, 0.01), GAS)

    def test_series_spans_run(self, trajectory) -> None:
        rows = glimm_series(trajectory, 4.0)
        assert rows[0][0] == trajectory.t_start
        assert rows[-1][0] == trajectory.t_final
        assert rows[0][2] == pytest.approx(0.0004)

    def test_calibrated_kappa_is_consistent(self, trajectory, box) -> None:
        j = box.weight_constant(GAS)
        result = calibrate_kappa([trajectory], 1.0, GAS, j)
        assert result.value in KAPPA_SEARCH
        assert list(result.tried) == list(KAPPA_SEARCH[: len(result.tried)])
        if result.passed:
            assert weight_decay_audit(trajectory, result.value, 1.0, GAS, j).passed
