"""Unit tests for the weighted L1-equivalent distance and its monitors."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from frontlab.errors import RiemannSolverError, UsageError
from frontlab.functionals.bly import (
    a_fields,
    calibrate_bly_kappas,
    calibrate_k,
    common_refinement,
    decompose,
    equivalence_report,
    l1_distance,
    loglog_fit,
    nu_sweep_slope,
    phi,
    phi_breakdown,
    phi_slope_monitor,
)
from frontlab.models import Front, GasParameters, Profile, State
from frontlab.physics.waves import shock_curve, wave_curve
from frontlab.tracking.data import riemann_data
from frontlab.tracking.solvers import discretize_initial
from frontlab.tracking.tracker import SchemeParameters, evolve

GAS = GasParameters()
BASE = State(1.0, 0.0, 2.5)
WINDOW = (-1.0, 1.0)


def _chain(*waves: tuple[int, float, float]) -> Profile:
    fronts = []
    current = BASE
    for index, (family, sigma, x) in enumerate(waves):
        point = wave_curve(current, family, sigma, GAS)
        fronts.append(Front(index, x, point.speed, family, point.kind, current, point.state, sigma))
        current = point.state
    return Profile(time=0.0, leftmost_state=BASE, fronts=tuple(fronts))


CONSTANT = Profile(time=0.0, leftmost_state=BASE)


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


class TestDecomposition:
    """Hugoniot coordinates between two states."""

    def test_single_shock(self) -> None:
        right = shock_curve(BASE, 1, -0.02, GAS).state
        result = decompose(BASE, right, GAS)
        assert_allclose(result.q, [-0.02, 0.0, 0.0], atol=1e-8)
        assert result.total == pytest.approx(0.02, abs=1e-8)

    def test_equal_states(self) -> None:
        result = decompose(BASE, BASE, GAS)
        assert result.total == 0.0
        assert result.ratio == 1.0

    def test_far_states_rejected(self, box) -> None:
        with pytest.raises(RiemannSolverError):
            decompose(State(0.75, -0.25, 2.1), State(1.35, 0.25, 3.1), GAS, box)

    def test_equivalence_constant(self, box) -> None:
        constant = calibrate_k(box, GAS, n_pairs=60, radius=0.05, seed=4)
        assert constant.K >= 1.0
        assert constant.n_pairs > 0
        assert constant.min_ratio <= constant.max_ratio


# ---------------------------------------------------------------------------
# Distance
# ---------------------------------------------------------------------------


class TestPhi:
    """Evaluation of the distance on the common refinement."""

    def test_zero_on_diagonal(self) -> None:
        profile = _chain((1, -0.02, -0.3), (3, 0.01, 0.4))
        assert phi(profile, profile, WINDOW, 1.0, 1.0, GAS) == 0.0
        assert l1_distance(profile, profile, WINDOW) == 0.0

    def test_single_shock_against_constant(self) -> None:
        shocked = _chain((1, -0.02, 0.0))
        evaluation = phi_breakdown(CONSTANT, shocked, WINDOW, 1.0, 1.0, GAS)
        # One unit of length carries |q_1| = 0.02 with weight 1.
        assert evaluation.value == pytest.approx(0.02, abs=1e-7)
        jump = np.linalg.norm(shocked.rightmost_state.as_array() - BASE.as_array())
        assert evaluation.l1 == pytest.approx(jump)
        assert l1_distance(CONSTANT, shocked, WINDOW) == pytest.approx(jump)

    def test_approaching_wave_sums(self) -> None:
        u = _chain((3, -0.02, -0.5))
        x = np.array([0.0])
        assert_allclose(a_fields(x, u, CONSTANT, np.zeros((1, 3))), [[0.02, 0.02, 0.0]])
        assert_allclose(a_fields(x, u, CONSTANT, np.array([[0.0, 0.0, -1.0]])), [[0.02, 0.02, 0.02]])

    def test_refinement_includes_window_edges(self) -> None:
        edges = common_refinement((_chain((1, -0.02, 0.2)), _chain((3, -0.02, 1.5))), WINDOW)
        assert_allclose(edges, [-1.0, 0.2, 1.0])
        with pytest.raises(UsageError):
            common_refinement((CONSTANT,), (1.0, 1.0))

    def test_equivalence_report(self) -> None:
        pairs = [(CONSTANT, _chain((1, -0.02, 0.0))), (_chain((3, -0.01, -0.2)), _chain((2, 0.02, 0.3)))]
        report = equivalence_report(pairs, WINDOW, 0.5, 0.5, 10.0, GAS)
        assert report.passed, report.violations
        assert 1.0 <= report.min_weight <= report.max_weight <= 2.0
        assert report.to_dict()["name"] == "phi_equivalence"

    def test_kappas_shrink_until_weights_bounded(self) -> None:
        pairs = [(_chain((3, -0.02, -0.5), (1, -0.02, 0.5)), _chain((2, 0.02, 0.0)))]
        kappa1, kappa2, worst = calibrate_bly_kappas(pairs, WINDOW, GAS, 1000.0, 1000.0)
        assert worst <= 2.0
        assert kappa1 < 1000.0
        assert kappa1 == kappa2


# ---------------------------------------------------------------------------
# Monitors & fits
# ---------------------------------------------------------------------------


class TestMonitors:
    """Time monitor of the distance and the log-log fits."""

    def test_identical_runs_have_flat_distance(self, box) -> None:
        right = shock_curve(BASE, 3, -0.03, GAS).state
        profile = discretize_initial(riemann_data(BASE, right), box, 0.01, GAS)
        run = evolve(profile, 0.3, SchemeParameters.for_box(box, GAS, 0.01), GAS)
        report = phi_slope_monitor(run, run, WINDOW, 1.0, 1.0, GAS, 0.01, k=1.0)
        assert report.passed
        assert report.max_slope == 0.0
        assert report.k_required == 0.0
        assert all(value == 0.0 for _, value in report.samples)

    def test_monitor_rejects_bad_step(self, box) -> None:
        profile = discretize_initial(riemann_data(BASE, BASE), box, 0.01, GAS)
        run = evolve(profile, 0.1, SchemeParameters.for_box(box, GAS, 0.01), GAS)
        with pytest.raises(UsageError):
            phi_slope_monitor(run, run, WINDOW, 1.0, 1.0, GAS, 0.0)

    def test_loglog_fit_recovers_power(self) -> None:
        xs = [1e-3, 2e-3, 4e-3, 8e-3]
        fit = loglog_fit(xs, [3.0 * x**2 for x in xs])
        assert fit.slope == pytest.approx(2.0)
        assert fit.intercept == pytest.approx(math.log(3.0))
        assert fit.within(2.0, 1e-9)
        assert fit.ci_low <= fit.slope <= fit.ci_high

    def test_loglog_fit_drops_non_positive_points(self) -> None:
        fit = loglog_fit([0.0, 1.0, 2.0], [5.0, 1.0, 2.0])
        assert fit.n == 2
        assert fit.slope == pytest.approx(1.0)
        with pytest.raises(UsageError):
            loglog_fit([1.0], [1.0])

    def test_nu_sweep_orders_by_nu(self) -> None:
        fit = nu_sweep_slope({0.01: 0.02, 0.0025: 0.005, 0.005: 0.01})
        assert fit.slope == pytest.approx(1.0)
        assert [p[0] for p in fit.points] == [0.0025, 0.005, 0.01]
