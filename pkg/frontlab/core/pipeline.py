"""Experiment pipeline.

Every subcommand of the CLI is a ``run_*`` function taking the validated
configuration, the run directory's single :class:`~frontlab.utils.RunWriter`
and a ``map``-like callable for independent cells. Cells return values;
only these functions write files.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from frontlab.config import RunConfig
from frontlab.core.calibration import RAREFACTION_SIGMAS, calibrate_constants
from frontlab.errors import ConfigurationError, SolverError, StageError, UsageError
from frontlab.functionals.bly import (
    calibrate_bly_kappas,
    calibrate_k,
    equivalence_report,
    nu_sweep_slope,
    phi_slope_monitor,
)
from frontlab.functionals.entropy import (
    HOLDER_CSV_HEADER,
    HolderSettings,
    Ledger,
    SuiteReport,
    collect_shock_samples,
    contact_dissipation_suite,
    entropy_production_audit,
    holder_experiment,
    info_speed,
    nu_refinement,
    quadrilateral_audit,
    rarefaction_delta_sweep,
    shock_dissipation_suite,
)
from frontlab.functionals.glimm import (
    KAPPA_SEARCH,
    AuditReport,
    build_weight,
    calibrate_kappa,
    check_ratios,
    glimm_series,
    weight_decay_audit,
)
from frontlab.models import SHOCK, GasParameters, Profile, State, StateBox
from frontlab.physics.waves import lax_admissible, rh_residual, sample_curve, solve_riemann
from frontlab.tracking.data import build_initial_data, perturbed
from frontlab.tracking.shifts import ConstantOffset, ShiftPolicy, ShiftWindow, TraceDriven
from frontlab.tracking.solvers import discretize_initial
from frontlab.tracking.tracker import SchemeParameters, TrajectoryRecord, evolve
from frontlab.utils import RunWriter

logger = logging.getLogger(__name__)

Mapper = Callable[..., Iterator]

RIEMANN_SAMPLES: int = 200
RIEMANN_RADIUS: float = 0.05
COMPOSITION_TOL: float = 1e-9
RH_TOL: float = 1e-10
PHI_SAMPLE_TIMES: int = 5

FAN_CSV_HEADER: tuple[str, ...] = ("family", "kind", "sigma", "speed_low", "speed_high", "tau_R", "w_R", "E_R")
CURVE_CSV_HEADER: tuple[str, ...] = ("family", "sigma", "kind", "speed", "tau", "w", "E")
PROFILE_CSV_HEADER: tuple[str, ...] = ("id", "x", "speed", "family", "kind", "sigma", "tau_R", "w_R", "E_R")
GLIMM_CSV_HEADER: tuple[str, ...] = ("t", "L", "Q", "upsilon")


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class CommandResult:
    """Outcome of one subcommand.

    Attributes:
        name: Subcommand name.
        passed: ``False`` when any invariant failed; the CLI exits with 1.
        summary: Flat key/value overview rendered by the CLI.
        files: Artifacts written, in order.
    """

    name: str
    passed: bool
    summary: dict = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "command": self.name,
            "passed": self.passed,
            "summary": self.summary,
            "files": [str(p) for p in self.files],
        }


# ---------------------------------------------------------------------------
# Lab setup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lab:
    """Gas, box, scheme parameters and shift window built from one configuration."""

    gas: GasParameters
    box: StateBox
    params: SchemeParameters
    window: ShiftWindow
    j: float

    @classmethod
    def from_config(cls, config: RunConfig, nu: float | None = None) -> Lab:
        gas = config.gas_parameters()
        box = config.state_box()
        scheme = config.scheme
        nu = scheme.nu if nu is None else nu
        jitter = None if scheme.speed_jitter is None else min(scheme.speed_jitter, nu)
        params = SchemeParameters.for_box(
            box,
            gas,
            nu,
            lambda_hat=scheme.lambda_hat,
            kappa=scheme.kappa,
            np_threshold=scheme.np_threshold,
            speed_jitter=jitter,
            max_interactions=scheme.max_interactions,
            seed=config.seed,
        )
        window = ShiftWindow.for_box(box, gas, params.lambda_hat, scheme.alpha)
        return cls(gas=gas, box=box, params=params, window=window, j=box.weight_constant(gas))

    def with_nu(self, nu: float) -> Lab:
        jitter = min(self.params.speed_jitter, 0.1 * nu)
        threshold = nu if self.params.np_threshold == self.params.nu else self.params.np_threshold
        return replace(self, params=replace(self.params, nu=nu, speed_jitter=jitter, np_threshold=threshold))


@contextmanager
def worker_map(jobs: int) -> Iterator[Mapper]:
    """``map`` for one job, a process pool's ordered ``map`` otherwise."""
    if jobs < 1:
        raise UsageError(f"--jobs must be at least 1, got {jobs}")
    if jobs == 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


def _evolve_job(job: tuple) -> TrajectoryRecord:
    data, box, gas, params, t_final, shift, n_samples = job
    profile = discretize_initial(data, box, params.nu, gas, interval=data.interval, n_samples=n_samples)
    return evolve(profile, t_final, params, gas, shift)


def _map_runs(mapper: Mapper, jobs: list) -> list[TrajectoryRecord]:
    return list(mapper(_evolve_job, jobs))


def seeded_runs(config: RunConfig, lab: Lab, mapper: Mapper = map, n_runs: int | None = None) -> list[TrajectoryRecord]:
    """Un-shifted runs from the configured data family, seeds ``seed, seed + 1, ...``."""
    n_runs = config.experiment.n_runs if n_runs is None else n_runs
    jobs = [
        (
            build_initial_data(config.data, lab.box, config.seed + k),
            lab.box,
            lab.gas,
            lab.params,
            config.scheme.t_final,
            None,
            config.data.samples,
        )
        for k in range(n_runs)
    ]
    return _map_runs(mapper, jobs)


def build_shift(config: RunConfig, lab: Lab, data) -> ShiftPolicy | None:
    """Shift policy of an ``evolve`` run; trace-driven runs track a fine-nu run of the same data."""
    section = config.shift
    if section.policy == "none":
        return None
    if section.policy == "constant_offset":
        return ConstantOffset(section.offset, lab.window)
    fine = lab.with_nu(config.experiment.nu_fine)
    reference = _evolve_job((data, lab.box, lab.gas, fine.params, config.scheme.t_final, None, config.data.samples))
    return TraceDriven(reference, lab.window, lab.gas, refresh_dt=section.refresh_dt)


@dataclass
class Experiment:
    """Lazily built runs shared by the validation checks and the calibration suite."""

    config: RunConfig
    lab: Lab
    mapper: Mapper = map

    @cached_property
    def data(self):
        return build_initial_data(self.config.data, self.lab.box, self.config.seed)

    @cached_property
    def runs(self) -> list[TrajectoryRecord]:
        return seeded_runs(self.config, self.lab, self.mapper)

    @cached_property
    def fine(self) -> Lab:
        return self.lab.with_nu(self.config.experiment.nu_fine)

    @cached_property
    def shifted_pair(self) -> tuple[TrajectoryRecord, TrajectoryRecord]:
        """Fine reference ``u`` from perturbed data and ``psi``, the trace-driven run from the data."""
        experiment, lab = self.config.experiment, self.fine
        if experiment.reference == "none":
            raise StageError("reference", ConfigurationError("no reference solution family configured"))
        amplitude = max(experiment.perturbation_ladder)
        u_data = perturbed(self.data, amplitude, self.config.data.component)
        u = _evolve_job((u_data, lab.box, lab.gas, lab.params, experiment.tau, None, self.config.data.samples))
        policy = TraceDriven(u, lab.window, lab.gas)
        psi = _evolve_job((self.data, lab.box, lab.gas, lab.params, experiment.tau, policy, self.config.data.samples))
        return u, psi

    @cached_property
    def speed(self):
        return info_speed(self.lab.box, self.lab.box.grid(self.config.experiment.grid_n), self.lab.gas,
                          self.lab.params.lambda_hat, self.config.experiment.grid_n)

    @cached_property
    def shock_suite(self) -> SuiteReport:
        """Dissipation at the shocks of the trace-driven run against the fine reference."""
        u, psi = self.shifted_pair
        lab, experiment = self.fine, self.config.experiment
        n = max(int(round((psi.t_final - psi.t_start) / experiment.sample_dt)), 1)
        samples = collect_shock_samples(
            u, psi, self.sample_times(psi, n), lab.gas, kappa=lab.params.kappa, c1=self.config.weight.C1, j=lab.j
        )
        return shock_dissipation_suite(samples, min_shift=lab.params.speed_jitter)

    @cached_property
    def ledger(self) -> Ledger:
        u, psi = self.shifted_pair
        lab, experiment = self.fine, self.config.experiment
        return quadrilateral_audit(
            u,
            psi,
            R=experiment.R,
            tau=experiment.tau,
            s=self.speed.s,
            gas=lab.gas,
            kappa=lab.params.kappa,
            c1=self.config.weight.C1,
            j=lab.j,
        )

    @cached_property
    def phi_pairs(self) -> list[tuple[Profile, Profile]]:
        """Profiles of consecutive seeded runs at common interior times."""
        pairs = []
        for u, v in zip(self.runs, self.runs[1:]):
            for t in self.sample_times(u, PHI_SAMPLE_TIMES):
                pairs.append((u.profile_at(float(t)), v.profile_at(float(t))))
        return pairs

    def sample_times(self, trajectory: TrajectoryRecord, n: int) -> np.ndarray:
        return np.linspace(trajectory.t_start, trajectory.t_final, n + 2)[1:-1]


# ---------------------------------------------------------------------------
# riemann
# ---------------------------------------------------------------------------


def run_riemann(config: RunConfig, writer: RunWriter, mapper: Mapper = map) -> CommandResult:
    """Solve the configured Riemann problem and dump the fan and the wave curves through ``u_L``."""
    lab = Lab.from_config(config)
    left, right = State(*config.riemann.left), State(*config.riemann.right)
    fan = solve_riemann(left, right, lab.gas, lab.box)
    waves = fan.waves()

    violations = []
    for wave in waves:
        if wave["kind"] != SHOCK:
            continue
        residual = rh_residual(wave["left_state"], wave["right_state"], wave["speed_low"], lab.gas)
        if residual > RH_TOL:
            violations.append(f"{wave['family']}-shock RH residual {residual:.3e}")
        if not lax_admissible(wave["left_state"], wave["right_state"], wave["family"], wave["speed_low"], lab.gas):
            violations.append(f"{wave['family']}-shock violates the Lax condition")

    fan_rows = [
        [w["family"], w["kind"], w["sigma"], w["speed_low"], w["speed_high"], *w["right_state"].as_array().tolist()]
        for w in waves
    ]
    span = max([abs(s) for s in fan.sigmas] + [RIEMANN_RADIUS])
    sigmas = np.linspace(-span, span, config.riemann.curve_samples)
    curve_rows = []
    for family in (1, 2, 3):
        for point in sample_curve(left, family, sigmas, lab.gas):
            curve_rows.append([family, point.sigma, point.kind or "origin", point.speed, *point.state.as_array().tolist()])

    writer.write_csv("riemann_fan.csv", FAN_CSV_HEADER, fan_rows)
    writer.write_csv("wave_curves.csv", CURVE_CSV_HEADER, curve_rows)
    writer.write_json(
        "riemann.json",
        {
            "fan": fan.to_dict(),
            "waves": [
                {**w, "left_state": w["left_state"].to_dict(), "right_state": w["right_state"].to_dict()}
                for w in waves
            ],
            "violations": violations,
        },
    )
    summary = {"waves": len(waves), "residual": fan.residual, "iterations": fan.iterations}
    return CommandResult("riemann", not violations, summary, list(writer.written))


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------


def run_evolve(config: RunConfig, writer: RunWriter, mapper: Mapper = map) -> CommandResult:
    """One front-tracking run: trajectory JSON, profile CSVs and the Glimm series."""
    lab = Lab.from_config(config)
    data = build_initial_data(config.data, lab.box, config.seed)
    shift = build_shift(config, lab, data)
    trajectory = _evolve_job((data, lab.box, lab.gas, lab.params, config.scheme.t_final, shift, config.data.samples))

    t_final = trajectory.t_final
    times = sorted({trajectory.t_start, t_final, *(t for t in config.experiment.profile_times if 0.0 <= t <= t_final)})
    writer.write_json("trajectory.json", trajectory.to_dict(times))
    for k, t in enumerate(times):
        writer.write_csv(f"profile_{k:03d}.csv", PROFILE_CSV_HEADER, trajectory.profile_at(t).csv_rows())
    series = glimm_series(trajectory, lab.params.kappa)
    writer.write_csv("glimm.csv", GLIMM_CSV_HEADER, series)

    violations = [*trajectory.audit_pairwise(), *trajectory.audit_speeds(lab.gas)]
    final = trajectory.profile_at(t_final)
    summary = {
        "events": len(trajectory.events),
        "fronts_final": len(final.fronts),
        "total_variation_final": final.total_variation(),
        "np_strength_final": final.np_strength(),
        "upsilon_start": series[0][3] if series else 0.0,
        "upsilon_final": series[-1][3] if series else 0.0,
        "shift": trajectory.shift["policy"] if trajectory.shift else "none",
        "violations": len(violations),
    }
    for line in violations[:20]:
        logger.warning(line)
    return CommandResult("evolve", not violations, summary, list(writer.written))


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _merge(name: str, reports: list[AuditReport]) -> AuditReport:
    violations = tuple(v for r in reports for v in r.violations)
    return AuditReport(name, all(r.passed for r in reports), sum(r.checked for r in reports), violations[:50],
                       {"reports": len(reports), "n_violations": len(violations)})


def check_riemann(experiment: Experiment) -> list[dict]:
    """Randomized small-data Riemann problems: composition, RH residual and Lax condition."""
    lab = experiment.lab
    rng = np.random.default_rng(experiment.config.seed)
    centers = lab.box.sample(rng, RIEMANN_SAMPLES)
    offsets = rng.uniform(-RIEMANN_RADIUS, RIEMANN_RADIUS, size=(RIEMANN_SAMPLES, 3)) * lab.box.widths
    violations = []
    checked = 0
    for center, offset in zip(centers, offsets):
        right = center + offset
        if not lab.box.contains(right):
            continue
        u_left, u_right = State.from_array(center), State.from_array(right)
        checked += 1
        try:
            fan = solve_riemann(u_left, u_right, lab.gas, lab.box)
        except SolverError as exc:
            violations.append(f"{center.tolist()} -> {right.tolist()}: {exc}")
            continue
        if fan.residual > COMPOSITION_TOL:
            violations.append(f"composition residual {fan.residual:.3e}")
        for wave in fan.waves():
            if wave["kind"] != SHOCK:
                continue
            residual = rh_residual(wave["left_state"], wave["right_state"], wave["speed_low"], lab.gas)
            if residual > RH_TOL:
                violations.append(f"RH residual {residual:.3e}")
            if not lax_admissible(wave["left_state"], wave["right_state"], wave["family"], wave["speed_low"], lab.gas):
                violations.append(f"{wave['family']}-shock violates the Lax condition")
    return [AuditReport("riemann", not violations, checked, tuple(violations[:50])).to_dict()]


def check_glimm(experiment: Experiment) -> list[dict]:
    """Upsilon and weight decay at every event, plus the tracker's own audits.

    ``kappa`` is calibrated on the seeded runs, starting from the configured
    value; the decay audit uses the calibrated one.
    """
    lab, c1 = experiment.lab, experiment.config.weight.C1
    configured = lab.params.kappa
    candidates = (configured, *(k for k in KAPPA_SEARCH if k > configured))
    calibrated = calibrate_kappa(experiment.runs, c1, lab.gas, lab.j, candidates)
    decay = [weight_decay_audit(run, calibrated.value, c1, lab.gas, lab.j) for run in experiment.runs]
    tracking = []
    for run in experiment.runs:
        violations = (*run.audit_pairwise(), *run.audit_speeds(lab.gas))
        tracking.append(AuditReport("tracking", not violations, len(run.events), violations))
    report = _merge("weight_decay", decay)
    report.details.update(kappa_configured=configured, kappa_used=calibrated.value, kappa_tried=list(calibrated.tried))
    return [report.to_dict(), _merge("tracking", tracking).to_dict()]


def check_weights(experiment: Experiment) -> list[dict]:
    """Contact, shock and rarefaction ratio constraints on every event profile."""
    lab, c1 = experiment.lab, experiment.config.weight.C1
    reports = []
    for run in experiment.runs:
        for t in [run.t_start, *run.event_times()]:
            weight = build_weight(run.profile_at(t), lab.params.kappa, c1, lab.gas, lab.j)
            reports.append(check_ratios(weight, lab.gas))
    return [_merge("weight_ratios", reports).to_dict()]


def check_phi(experiment: Experiment) -> list[dict]:
    """L1 equivalence of Phi, un-shifted slope scaling in nu, and shifted slope bounds."""
    config, lab = experiment.config, experiment.lab
    window = config.data.interval
    pairs = experiment.phi_pairs
    equivalence = calibrate_k(lab.box, lab.gas, seed=config.seed)
    kappa1, kappa2, _ = calibrate_bly_kappas(pairs, window, lab.gas, config.bly.kappa1, config.bly.kappa2)
    reports = [equivalence_report(pairs, window, kappa1, kappa2, equivalence.K, lab.gas).to_dict()]

    data = experiment.data
    bumped = perturbed(data, max(config.experiment.perturbation_ladder), config.data.component)
    max_slopes = {}
    for nu in config.experiment.nu_ladder:
        rung = lab.with_nu(nu)
        jobs = [
            (source, rung.box, rung.gas, rung.params, config.scheme.t_final, None, config.data.samples)
            for source in (bumped, data)
        ]
        u, v = _map_runs(experiment.mapper, jobs)
        report = phi_slope_monitor(u, v, window, kappa1, kappa2, lab.gas, config.experiment.sample_dt)
        max_slopes[nu] = report.max_slope
    slope_report = {"name": "phi_nu_sweep", "max_slopes": {str(k): v for k, v in max_slopes.items()}}
    try:
        fit = nu_sweep_slope(max_slopes)
        slope_report.update(passed=fit.within(1.0, 0.3), fit=fit.to_dict())
    except UsageError as exc:
        slope_report.update(passed=False, error=str(exc))
    reports.append(slope_report)

    u = _evolve_job((bumped, lab.box, lab.gas, lab.params, config.scheme.t_final, None, config.data.samples))
    v0 = discretize_initial(data, lab.box, lab.params.nu, lab.gas, interval=config.data.interval,
                            n_samples=config.data.samples)
    # Initial fronts are numbered left to right.
    shocks = frozenset(k for k, f in enumerate(v0.fronts) if f.kind == SHOCK)
    if not shocks:
        reports.append({"name": "phi_shifted", "passed": True, "skipped": "initial data carry no shock"})
        return reports
    target = frozenset({min(shocks)})
    jobs = [
        (data, lab.box, lab.gas, lab.params, config.scheme.t_final, ConstantOffset(c, lab.window, front_ids=target),
         config.data.samples)
        for c in config.experiment.offsets
    ]
    monitors = [
        phi_slope_monitor(u, psi, window, kappa1, kappa2, lab.gas, config.experiment.sample_dt)
        for psi in _map_runs(experiment.mapper, jobs)
    ]
    # Without a given K the monitors only flag jumps; one (K, C) must then cover every offset.
    k = max(m.k_required for m in monitors)
    c = max(m.c for m in monitors)
    reports.append(
        {
            "name": "phi_shifted",
            "passed": all(m.passed for m in monitors) and math.isfinite(k),
            "K": k,
            "C": c,
            "offsets": list(config.experiment.offsets),
            "monitors": [m.to_dict() for m in monitors],
        }
    )
    return reports


def check_contact(experiment: Experiment) -> list[dict]:
    config = experiment.config
    report = contact_dissipation_suite(
        experiment.lab.box, experiment.lab.gas, n_samples=config.experiment.n_samples, seed=config.seed
    )
    return [report.to_dict()]


def check_shock(experiment: Experiment) -> list[dict]:
    return [experiment.shock_suite.to_dict()]


def check_ledger(experiment: Experiment) -> list[dict]:
    """Quadrilateral ledger over the information cone and the entropy production audit."""
    lab = experiment.fine
    production = _merge("entropy_production", [entropy_production_audit(run, lab.gas) for run in experiment.runs])
    return [{**experiment.ledger.to_dict(), "info_speed": experiment.speed.to_dict()}, production.to_dict()]


def check_rarefaction(experiment: Experiment) -> list[dict]:
    reference = experiment.lab.box.reference or experiment.lab.box.center()
    reports = []
    for family in (1, 3):
        sweep = rarefaction_delta_sweep(reference, family, RAREFACTION_SIGMAS, experiment.lab.gas)
        reports.append({**sweep.to_dict(), "name": f"rarefaction_{family}"})
    return reports


CHECKS: dict[str, Callable[[Experiment], list[dict]]] = {
    "riemann": check_riemann,
    "glimm": check_glimm,
    "weights": check_weights,
    "phi": check_phi,
    "contact": check_contact,
    "shock": check_shock,
    "ledger": check_ledger,
    "rarefaction": check_rarefaction,
}


def run_validate(config: RunConfig, writer: RunWriter, mapper: Mapper = map) -> CommandResult:
    """Run the selected invariant checks and write ``validate.json``.

    Raises:
        UsageError: If no check is selected.
    """
    if not config.experiment.checks:
        raise UsageError("experiment.checks is empty; nothing to validate")
    experiment = Experiment(config, Lab.from_config(config), mapper)
    reports: list[dict] = []
    for name in config.experiment.checks:
        logger.info("running check %s", name)
        reports.extend(CHECKS[name](experiment))
    passed = all(bool(r["passed"]) for r in reports)
    writer.write_json("validate.json", {"passed": passed, "checks": reports})
    summary = {r["name"]: "pass" if r["passed"] else "FAIL" for r in reports}
    return CommandResult("validate", passed, summary, list(writer.written))


# ---------------------------------------------------------------------------
# holder
# ---------------------------------------------------------------------------


def run_holder(config: RunConfig, writer: RunWriter, mapper: Mapper = map) -> CommandResult:
    """Stability experiment over the perturbation ladder, repeated on every ``nu`` rung.

    The table, ``K`` and the exponent are reported at ``nu_fine``, which joins
    the rungs if the ladder misses it; every rung feeds the ``nu`` refinement check.
    """
    experiment = config.experiment
    if experiment.reference == "none":
        raise StageError("reference", ConfigurationError("no reference solution family configured"))
    lab = Lab.from_config(config)
    data = build_initial_data(config.data, lab.box, config.seed)
    settings = HolderSettings(
        perturbations=tuple(experiment.perturbation_ladder),
        R=experiment.R,
        tau=experiment.tau,
        kappa=lab.params.kappa,
        c1=config.weight.C1,
        kappa1=config.bly.kappa1,
        kappa2=config.bly.kappa2,
        component=config.data.component,
        grid_n=experiment.grid_n,
        alpha=config.scheme.alpha,
    )
    results = {}
    for nu in sorted({*experiment.nu_ladder, experiment.nu_fine}, reverse=True):
        logger.info("holder ladder at nu=%g", nu)
        rung = lab.with_nu(nu)
        results[nu] = holder_experiment(data, rung.box, rung.gas, rung.params, settings, mapper=mapper)
    refinement = nu_refinement(results)
    fine = results[experiment.nu_fine]
    passed = fine.passed and refinement.passed

    csv_rows = [[nu, *row.csv_row()] for nu, result in results.items() for row in result.rows]
    writer.write_csv("holder.csv", ("nu", *HOLDER_CSV_HEADER), csv_rows)
    writer.write_json(
        "holder.json",
        {
            **fine.to_dict(),
            "passed": passed,
            "nu": experiment.nu_fine,
            "rungs": [{"nu": nu, **result.to_dict()} for nu, result in results.items()],
            "nu_refinement": refinement.to_dict(),
        },
    )
    summary = {
        "rows": len(fine.rows),
        "s": fine.s,
        "K": fine.K,
        "exponent": None if fine.fit is None else fine.fit.slope,
        "exponent_ok": fine.exponent_ok,
        "nu_order": None if refinement.fit is None else refinement.fit.slope,
        "nu_refinement": "pass" if refinement.passed else "FAIL",
    }
    return CommandResult("holder", passed, summary, list(writer.written))


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------


def run_calibrate(config: RunConfig, writer: RunWriter, mapper: Mapper = map) -> CommandResult:
    """Calibrate every constant of the suite and write ``constants.json``."""
    experiment = Experiment(config, Lab.from_config(config), mapper)
    ledger = calibrate_constants(experiment, writer.config_hash)
    writer.write_json("constants.json", ledger.to_dict())
    summary = {c.name: c.value for c in ledger.constants}
    return CommandResult("calibrate", ledger.passed, summary, list(writer.written))
