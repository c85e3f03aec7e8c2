"""Unit tests for the weighted relative entropy, dissipation suites and the ledger."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frontlab.errors import UsageError
from frontlab.functionals.bly import SlopeFit
from frontlab.functionals.entropy import (
    STABILITY_EXPONENT,
    STABILITY_EXPONENT_TOL,
    DissipationSample,
    GridFunction,
    HolderResult,
    HolderRow,
    HolderSettings,
    RarefactionFanSolution,
    collect_shock_samples,
    contact_dissipation_suite,
    dissipation_at_front,
    dissipation_value,
    entropy_production_audit,
    holder_experiment,
    info_speed,
    l1_norm_distance,
    l2_distance,
    linf_distance,
    nu_refinement,
    oscillatory_profile,
    quadrilateral_audit,
    rarefaction_delta_sweep,
    rarefaction_dissipation_check,
    shock_dissipation_suite,
    total_entropy,
    trace_at,
    weighted_energy,
)
from frontlab.functionals.glimm import build_weight
from frontlab.models import SHOCK, Front, GasParameters, Profile, State
from frontlab.physics.gas import eta, relative_entropy, relative_flux
from frontlab.physics.waves import characteristic_speed, contact_curve, shock_curve
from frontlab.tracking.data import constant_data, riemann_data, step_data
from frontlab.tracking.solvers import discretize_initial
from frontlab.tracking.tracker import SchemeParameters, evolve, rh_speed
from tests.conftest import box_states

GAS = GasParameters()
BASE = State(1.0, 0.0, 2.5)
NU = 0.01


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _shock_run(box, sigma: float = -0.03, t_final: float = 0.5):
    right = shock_curve(BASE, 3, sigma, GAS).state
    profile = discretize_initial(riemann_data(BASE, right), box, NU, GAS)
    return evolve(profile, t_final, SchemeParameters.for_box(box, GAS, NU), GAS)


def _collision_run(box):
    middle = shock_curve(BASE, 3, -0.02, GAS).state
    right = shock_curve(middle, 1, -0.02, GAS).state
    profile = discretize_initial(step_data([-0.3, 0.3], [BASE, middle, right]), box, NU, GAS)
    return evolve(profile, 1.0, SchemeParameters.for_box(box, GAS, NU), GAS)


def _constant(state: State) -> Profile:
    return Profile(time=0.0, leftmost_state=state)


# ---------------------------------------------------------------------------
# Dissipation at a front
# ---------------------------------------------------------------------------


class TestDissipation:
    """The dissipation functional at single fronts."""

    def test_zero_when_traces_match_front(self) -> None:
        right = shock_curve(BASE, 1, -0.04, GAS).state
        front = Front(0, 0.0, -1.2, 1, SHOCK, BASE, right, -0.04)
        sample = dissipation_at_front((BASE, right), front, 1.0, 0.9, rh_speed(front, GAS), GAS)
        assert sample.D == pytest.approx(0.0, abs=1e-15)
        assert sample.shift_penalty == pytest.approx(0.0, abs=1e-20)

    @settings(max_examples=40, deadline=None)
    @given(box_states(), st.floats(-0.02, 0.02), st.floats(0.9, 1.1))
    def test_temperature_weighted_contacts_do_not_dissipate(self, u_minus, sigma, stretch) -> None:
        left = State(1.0, 0.0, 2.5)
        right = contact_curve(left, sigma, GAS).state
        p = (GAS.gamma - 1.0) * u_minus.internal_energy / u_minus.tau
        tau = u_minus.tau * stretch
        u_plus = State(tau, u_minus.w, 0.5 * u_minus.w**2 + p * tau / (GAS.gamma - 1.0))
        theta_left = left.internal_energy / GAS.c_v
        theta_right = right.internal_energy / GAS.c_v
        value = dissipation_value(u_minus, u_plus, left, right, theta_left, theta_right, 0.0, GAS)
        assert abs(value) <= 1e-12

    def test_contact_suite_passes(self, box) -> None:
        report = contact_dissipation_suite(box, GAS, n_samples=200, seed=5)
        assert report.passed
        assert report.n_samples > 0
        assert report.n_positive == 0

    def test_vectorized_matches_scalar(self) -> None:
        right = shock_curve(BASE, 3, -0.03, GAS).state
        u_minus = np.array([[1.0, 0.01, 2.5], [1.02, 0.0, 2.45]])
        u_plus = np.array([[0.97, 0.02, 2.6], [0.98, -0.01, 2.55]])
        values = dissipation_value(u_minus, u_plus, BASE, right, 1.0, 1.1, 1.2, GAS)
        for k in range(2):
            expected = 1.1 * (
                relative_flux(State(*u_plus[k]), right, GAS) - 1.2 * relative_entropy(State(*u_plus[k]), right, GAS)
            ) - (relative_flux(State(*u_minus[k]), BASE, GAS) - 1.2 * relative_entropy(State(*u_minus[k]), BASE, GAS))
            assert values[k] == pytest.approx(expected)


class TestShockSuite:
    """Calibration of the shock dissipation constant."""

    @staticmethod
    def _sample(d: float, h_dot: float, rh: float = 1.0) -> DissipationSample:
        return DissipationSample(0, 0.0, SHOCK, 3, BASE, BASE, 1.0, 2.0, h_dot, rh, d, 0.5)

    def test_constant_is_smallest_ratio(self) -> None:
        samples = [self._sample(-0.04, 1.2), self._sample(-0.09, 1.3)]
        report = shock_dissipation_suite(samples, min_shift=0.01)
        # Penalties are 2 * 0.5 * shift**2: 0.04 and 0.09.
        assert report.constant == pytest.approx(1.0)
        assert report.passed

    def test_positive_unshifted_dissipation_fails(self) -> None:
        report = shock_dissipation_suite([self._sample(1e-3, 1.0)], min_shift=0.01)
        assert not report.passed
        assert report.n_positive == 1

    def test_samples_from_identical_runs(self, box) -> None:
        run = _shock_run(box)
        j = box.weight_constant(GAS)
        samples = collect_shock_samples(run, run, [0.1, 0.2, 0.4], GAS, kappa=4.0, c1=1.0, j=j)
        assert len(samples) == 3
        assert all(abs(s.D) <= 1e-14 for s in samples)
        assert shock_dissipation_suite(samples, min_shift=NU).passed


# ---------------------------------------------------------------------------
# Information speed
# ---------------------------------------------------------------------------


class TestInfoSpeed:
    """Speed bounding relative flux by relative entropy."""

    def test_bounds_grid_pairs(self, box) -> None:
        states = box.grid(3)
        speed = info_speed(box, states, GAS, lambda_hat=1.0, grid_n=3)
        assert speed.s > speed.lambda_hat
        assert speed.s >= speed.raw
        a = np.repeat(states, len(states), axis=0)
        b = np.tile(states, (len(states), 1))
        rel = relative_entropy(a, b, GAS)
        keep = rel > 1e-14
        assert np.all(np.abs(relative_flux(a[keep], b[keep], GAS)) <= speed.s * rel[keep])

    def test_raised_above_lambda_hat(self, box) -> None:
        speed = info_speed(box, [BASE], GAS, lambda_hat=100.0, grid_n=3)
        assert speed.enforced
        assert speed.s == pytest.approx(105.0)

    def test_empty_range_rejected(self, box) -> None:
        with pytest.raises(UsageError):
            info_speed(box, [], GAS, lambda_hat=1.0)


# ---------------------------------------------------------------------------
# Reference solutions
# ---------------------------------------------------------------------------


class TestReferenceSolutions:
    """Grid functions and exact rarefaction fans."""

    def test_grid_function_traces(self) -> None:
        grid = GridFunction(edges=np.array([-1.0, 0.0, 1.0]), values=np.array([[1.0, 0.0, 2.5], [1.1, 0.0, 2.5]]))
        left, right = grid.traces(0.0)
        assert left == BASE
        assert right == State(1.1, 0.0, 2.5)
        assert grid.change_times() == []
        with pytest.raises(UsageError):
            GridFunction(edges=np.array([0.0, 1.0]), values=np.zeros((2, 3)))

    def test_trace_at_reads_any_reference(self) -> None:
        grid = GridFunction(edges=np.array([-1.0, 0.0, 1.0]), values=np.array([[1.0, 0.0, 2.5], [1.1, 0.0, 2.5]]))
        assert trace_at(grid, 0.0, 0.3) == grid.traces(0.0)
        assert trace_at(grid, 0.5, 0.3) == (State(1.1, 0.0, 2.5), State(1.1, 0.0, 2.5))

    def test_oscillatory_profile_stays_near_reference(self, box) -> None:
        grid = oscillatory_profile(BASE, 0.05, 200, box=box)
        assert grid.values.shape == (200, 3)
        assert np.max(np.abs(grid.values[:, 1])) <= 0.05
        assert np.all(grid.values[:, 0] == 1.0)

    def test_fan_is_self_similar(self) -> None:
        fan = RarefactionFanSolution.from_strength(BASE, 3, 0.08, GAS)
        t = 2.0
        assert fan.state_at(fan.speed_left * t - 0.1, t) == BASE
        assert fan.state_at(fan.speed_right * t + 0.1, t) == fan.u_right
        xi = fan.speed_left + 0.03
        assert characteristic_speed(fan.state_at(xi * t, t), 3, GAS) == pytest.approx(xi, abs=1e-8)
        assert fan.breakpoints(t) == pytest.approx([fan.speed_left * t, fan.speed_right * t])

    def test_fan_endpoints_validated(self) -> None:
        with pytest.raises(UsageError):
            RarefactionFanSolution(BASE, State(1.1, 0.0, 2.5), 3, GAS)

    def test_rarefaction_check_rejects_foreign_speed(self) -> None:
        fan = RarefactionFanSolution.from_strength(BASE, 1, 0.05, GAS)
        with pytest.raises(UsageError):
            rarefaction_dissipation_check(fan, fan, fan.speed_right + 0.5, 1.0, GAS)

    def test_rarefaction_sweep_on_exact_fan(self) -> None:
        sweep = rarefaction_delta_sweep(BASE, 3, (0.02, 0.04, 0.08, 0.16), GAS)
        assert len(sweep.rows) == 4
        deltas = [row[1] for row in sweep.rows]
        assert deltas == sorted(deltas)
        assert sweep.passed
        assert math.isfinite(sweep.C)


# ---------------------------------------------------------------------------
# Energies & distances
# ---------------------------------------------------------------------------


class TestEnergies:
    """Weighted energy, total entropy and the terminal distances."""

    def test_energy_vanishes_for_identical_solutions(self, box) -> None:
        run = _shock_run(box)
        psi = run.profile_at(0.3)
        weight = build_weight(psi, 4.0, 1.0, GAS, box.weight_constant(GAS))
        assert weighted_energy(run, psi, weight, (-1.0, 1.0), GAS).value == 0.0

    def test_energy_positive_against_constant(self, box) -> None:
        run = _shock_run(box)
        psi = run.profile_at(0.3)
        weight = build_weight(psi, 4.0, 1.0, GAS, box.weight_constant(GAS))
        fan = RarefactionFanSolution.from_strength(BASE, 1, 0.05, GAS)
        energy = weighted_energy(fan, psi, weight, (-1.0, 1.0), GAS)
        assert energy.value > 0.0
        assert energy.quadrature_bound >= 0.0

    def test_misaligned_weight_rejected(self, box) -> None:
        run = _shock_run(box)
        weight = build_weight(run.profile_at(0.3), 4.0, 1.0, GAS, box.weight_constant(GAS))
        with pytest.raises(UsageError):
            weighted_energy(run, run.profile_at(0.1), weight, (-1.0, 1.0), GAS)

    def test_total_entropy_of_constant(self) -> None:
        state = State(1.1, 0.0, 2.4)
        assert total_entropy(_constant(state), (-1.0, 1.0), GAS) == pytest.approx(2.0 * eta(state, GAS))

    def test_distances_between_constants(self) -> None:
        u, v = _constant(BASE), _constant(State(1.0, 0.02, 2.5))
        window = (-1.0, 1.0)
        assert l1_norm_distance(u, v, window) == pytest.approx(0.04)
        assert l2_distance(u, v, window) == pytest.approx(math.sqrt(2.0) * 0.02)
        assert linf_distance(u, v, window) == pytest.approx(0.02)

    def test_entropy_production_within_budget(self, box) -> None:
        report = entropy_production_audit(_collision_run(box), GAS)
        assert report.passed, report.violations
        assert report.details["budget"] >= 0.0


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


class TestLedger:
    """Quadrilateral balance over the backward cone."""

    def test_identical_solutions(self, box) -> None:
        run = _shock_run(box)
        ledger = quadrilateral_audit(run, run, R=0.3, tau=0.4, s=6.0, gas=GAS, kappa=4.0, c1=1.0, j=box.weight_constant(GAS))
        assert ledger.initial_energy == 0.0
        assert ledger.terminal_energy == 0.0
        assert ledger.passed
        assert ledger.to_dict()["name"] == "ledger"

    def test_distinct_shocks_balance(self, box) -> None:
        u = _shock_run(box, sigma=-0.03)
        psi = _shock_run(box, sigma=-0.025)
        ledger = quadrilateral_audit(u, psi, R=0.3, tau=0.4, s=6.0, gas=GAS, kappa=4.0, c1=1.0, j=box.weight_constant(GAS))
        assert ledger.balanced
        assert ledger.slab_violations == ()
        assert ledger.initial_energy > 0.0
        assert ledger.k_required >= 0.0

    def test_terminal_time_must_lie_in_run(self, box) -> None:
        run = _shock_run(box)
        with pytest.raises(UsageError):
            quadrilateral_audit(run, run, R=0.3, tau=2.0, s=6.0, gas=GAS, kappa=4.0, c1=1.0, j=1.0)


# ---------------------------------------------------------------------------
# Stability experiment
# ---------------------------------------------------------------------------


class TestHolderExperiment:
    """Perturbation ladders on a single shock and on a smooth bump."""

    def test_zero_perturbation_row(self, box) -> None:
        right = shock_curve(BASE, 3, -0.03, GAS).state
        data = riemann_data(BASE, right)
        params = SchemeParameters.for_box(box, GAS, NU)
        settings = HolderSettings(
            perturbations=(0.0, 0.004),
            R=0.2,
            tau=0.1,
            kappa=4.0,
            c1=1.0,
            kappa1=1.0,
            kappa2=1.0,
            grid_n=3,
        )
        result = holder_experiment(data, box, GAS, params, settings)
        assert len(result.rows) == 2
        first = result.rows[0]
        assert first.l2_initial == 0.0
        assert first.l2_terminal == 0.0
        assert result.rows[1].l2_initial > 0.0
        assert all(row.checks["triangle"] and row.checks["cauchy_schwarz"] for row in result.rows)
        assert result.to_dict()["name"] == "holder"

    def test_six_rung_ladder_on_a_bump(self, box) -> None:
        nu = 0.004
        ladder = (0.0, 0.02, 0.04, 0.06, 0.08, 0.1)
        params = SchemeParameters.for_box(box, GAS, nu)
        settings = HolderSettings(
            perturbations=ladder,
            R=0.8,
            tau=0.1,
            kappa=4.0,
            c1=1.0,
            kappa1=1.0,
            kappa2=1.0,
            grid_n=3,
        )
        result = holder_experiment(constant_data(BASE), box, GAS, params, settings)
        assert [row.perturbation for row in result.rows] == list(ladder)
        initial = [row.l2_initial for row in result.rows]
        terminal = [row.l2_terminal for row in result.rows]
        # A sin**2 bump of height A over a unit width has L2 norm A * sqrt(3/8).
        for amplitude, value in zip(ladder, initial):
            assert abs(value - amplitude * math.sqrt(3.0 / 8.0)) <= nu + 1e-3
        assert initial == sorted(initial)
        assert terminal[1] < terminal[3] < terminal[5]
        assert all(t <= result.K * math.sqrt(i) + 1e-12 for i, t in zip(initial[1:], terminal[1:]))
        assert result.fit is not None
        assert result.fit.n == 5
        assert result.exponent_ok
        assert result.to_dict()["exponent_ok"] is True


# ---------------------------------------------------------------------------
# Verdicts of the stability experiment
# ---------------------------------------------------------------------------


def _row(perturbation: float, l2_initial: float, l2_terminal: float, passed: bool = True) -> HolderRow:
    return HolderRow(
        perturbation=perturbation,
        l2_initial=l2_initial,
        l2_terminal=l2_terminal,
        l1_terminal=0.0,
        linf_terminal=0.0,
        l1_u_psi=0.0,
        l2_u_psi=0.0,
        l1_psi_v=0.0,
        phi_v_psi=0.0,
        shock_mass=0.0,
        shift_square=0.0,
        shift_abs=0.0,
        ledger={"K_required": 0.0},
        checks={"ledger_balanced": passed},
    )


def _fit(slope: float) -> SlopeFit:
    return SlopeFit(slope=slope, intercept=0.0, stderr=0.01, ci_low=slope - 0.05, ci_high=slope + 0.05, n=5)


def _ladder_result(terminals: list[float]) -> HolderResult:
    rows = tuple(_row(eps, eps, t) for eps, t in zip((0.0, 1e-3, 2e-3), terminals))
    return HolderResult(rows=rows, s=1.0, fit=None, K=1.0)


class TestHolderVerdict:
    """Exponent gate and nu refinement of the stability experiment."""

    def test_shallow_exponent_fails(self) -> None:
        result = HolderResult(rows=(), s=1.0, fit=_fit(0.05), K=1.0)
        assert not result.exponent_ok
        assert not result.passed
        assert result.to_dict()["passed"] is False

    def test_missing_fit_fails(self) -> None:
        result = HolderResult(rows=(_row(0.0, 0.0, 0.0), _row(1e-3, 1e-3, 1e-3)), s=1.0, fit=None, K=1.0)
        assert not result.passed

    def test_exponent_at_tolerance_passes(self) -> None:
        floor = STABILITY_EXPONENT - STABILITY_EXPONENT_TOL
        assert HolderResult(rows=(_row(1e-3, 1e-3, 1e-3),), s=1.0, fit=_fit(floor), K=1.0).passed
        assert HolderResult(rows=(), s=1.0, fit=_fit(1.0), K=1.0).passed

    def test_failed_row_fails_despite_exponent(self) -> None:
        result = HolderResult(rows=(_row(1e-3, 1e-3, 1e-3, passed=False),), s=1.0, fit=_fit(1.0), K=1.0)
        assert result.exponent_ok
        assert not result.passed

    def test_first_order_refinement_passes(self) -> None:
        # Terminal distance 0.2 + 3 nu: consecutive changes are proportional to nu.
        nus = (0.01, 0.005, 0.0025, 0.00125)
        results = {nu: _ladder_result([0.0, 0.2 + 3.0 * nu, 0.3 + 3.0 * nu]) for nu in nus}
        refinement = nu_refinement(results)
        assert refinement.nus == (0.01, 0.005, 0.0025, 0.00125)
        assert refinement.changes == pytest.approx((0.015, 0.0075, 0.00375))
        assert refinement.C == pytest.approx(1.5)
        assert refinement.fit is not None
        assert refinement.fit.slope == pytest.approx(1.0)
        assert refinement.passed
        assert refinement.to_dict()["name"] == "nu_refinement"

    def test_non_converging_refinement_fails(self) -> None:
        # Alternating distances: changes do not shrink with nu.
        terminals = {0.01: 0.2, 0.005: 0.25, 0.0025: 0.2, 0.00125: 0.25}
        results = {nu: _ladder_result([0.0, t, t]) for nu, t in terminals.items()}
        refinement = nu_refinement(results)
        assert refinement.changes == pytest.approx((0.05, 0.05, 0.05))
        assert refinement.fit.slope == pytest.approx(0.0, abs=1e-9)
        assert not refinement.passed

    def test_single_rung_has_nothing_to_fit(self) -> None:
        refinement = nu_refinement({0.01: _ladder_result([0.0, 0.1, 0.2])})
        assert refinement.changes == ()
        assert refinement.fit is None
        assert refinement.passed

    def test_mismatched_ladders_rejected(self) -> None:
        other = HolderResult(rows=(_row(0.5, 0.5, 0.1),), s=1.0, fit=None, K=1.0)
        with pytest.raises(UsageError, match="perturbation ladders"):
            nu_refinement({0.01: _ladder_result([0.0, 0.1, 0.2]), 0.005: other})
