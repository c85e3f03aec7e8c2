"""Constants ledger.

None of the scheme's constants has a closed form; each is calibrated on
the configured suite and recorded with the suite name, the configuration
date and the hash of the configuration that produced it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from frontlab.errors import UsageError
from frontlab.functionals.bly import calibrate_bly_kappas, calibrate_k
from frontlab.functionals.entropy import rarefaction_delta_sweep
from frontlab.functionals.glimm import calibrate_c1, calibrate_kappa
from frontlab.physics.gas import calibrate_cstar

if TYPE_CHECKING:
    from frontlab.core.pipeline import Experiment

logger = logging.getLogger(__name__)

RAREFACTION_SIGMAS: tuple[float, ...] = (0.02, 0.04, 0.08, 0.16)


@dataclass(frozen=True)
class CalibratedConstant:
    """One calibrated value and its provenance."""

    name: str
    value: float
    suite: str
    date: str
    config_hash: str
    passed: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            # inf/nan are not valid JSON numbers.
            "value": self.value if math.isfinite(self.value) else None,
            "suite": self.suite,
            "date": self.date,
            "config_hash": self.config_hash,
            "passed": self.passed,
            "details": self.details,
        }


@dataclass(frozen=True)
class ConstantsLedger:
    constants: tuple[CalibratedConstant, ...]
    config_hash: str
    date: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constants)

    def get(self, name: str) -> CalibratedConstant:
        for constant in self.constants:
            if constant.name == name:
                return constant
        raise UsageError(f"no calibrated constant named {name!r}")

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "date": self.date,
            "constants": [c.to_dict() for c in self.constants],
        }


def calibrate_constants(experiment: Experiment, config_hash: str) -> ConstantsLedger:
    """Run every calibration of the suite in dependency order.

    ``kappa`` is calibrated before ``C1`` (the weight depends on both), and
    the Phi coefficients before anything that uses Phi.
    """
    config, lab = experiment.config, experiment.lab
    date = config.date
    entries: list[CalibratedConstant] = []

    def record(name: str, value: float, suite: str, passed: bool = True, **details) -> None:
        entries.append(CalibratedConstant(name, float(value), suite, date, config_hash, passed, details))
        logger.info("calibrated %s = %.6g (%s)", name, value, suite)

    cstar = calibrate_cstar(lab.box, lab.gas, seed=config.seed)
    record("C_star", cstar.c_star, "gas", **cstar.to_dict())
    record("lambda_hat", lab.params.lambda_hat, "scheme")
    record("alpha", lab.window.alpha, "scheme")

    runs = experiment.runs
    kappa = calibrate_kappa(runs, config.weight.C1, lab.gas, lab.j)
    record("kappa", kappa.value, "glimm", kappa.passed, tried=list(kappa.tried))
    profiles = [run.profile_at(t) for run in runs for t in [run.t_start, *run.event_times()]]
    c1 = calibrate_c1(profiles, kappa.value, lab.gas, lab.j, start=config.weight.C1)
    record("C1", c1.value, "glimm", c1.passed, tried=list(c1.tried))

    window = config.data.interval
    equivalence = calibrate_k(lab.box, lab.gas, seed=config.seed)
    record("K_equivalence", equivalence.K, "bly", **equivalence.to_dict())
    kappa1, kappa2, max_weight = calibrate_bly_kappas(
        experiment.phi_pairs, window, lab.gas, config.bly.kappa1, config.bly.kappa2
    )
    record("kappa1", kappa1, "bly", max_weight <= 2.0, max_weight=max_weight)
    record("kappa2", kappa2, "bly", max_weight <= 2.0, max_weight=max_weight)

    speed = experiment.speed
    record("s", speed.s, "info_speed", raw=speed.raw, enforced=speed.enforced)

    shock = experiment.shock_suite
    record("K_shock", shock.constant, "shock", shock.passed, samples=shock.n_samples, positive=shock.n_positive)
    ledger = experiment.ledger
    record("K_ledger", ledger.k_required, "ledger", ledger.passed, shift_penalty=ledger.shift_penalty)

    reference = lab.box.reference or lab.box.center()
    worst = 0.0
    passed = True
    for family in (1, 3):
        sweep = rarefaction_delta_sweep(reference, family, RAREFACTION_SIGMAS, lab.gas)
        worst = max(worst, sweep.C)
        passed = passed and sweep.passed
    record("C_rarefaction", worst, "rarefaction", passed)

    return ConstantsLedger(tuple(entries), config_hash, date)
