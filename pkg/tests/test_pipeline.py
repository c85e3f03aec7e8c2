"""Unit tests for the experiment pipeline and the CLI commands."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from frontlab import __version__
from frontlab.cli import app
from frontlab.config import parse_config
from frontlab.core.pipeline import Lab, run_holder, run_riemann, run_validate, worker_map
from frontlab.errors import StageError, UsageError
from frontlab.utils import RunWriter

runner = CliRunner()

EVOLVE_TOML = """
seed = 3

[scheme]
t_final = 0.2

[data]
kind = "riemann"
left = [1.0, 0.0, 2.5]
right = [1.0, -0.03, 2.5]

[experiment]
profile_times = [0.1]
"""

RANDOM_TOML = """
seed = 7

[scheme]
t_final = 0.15

[data]
kind = "random_steps"
n_jumps = 4
amplitude = 0.02
"""

CHECKS_TOML = """
seed = 5

[scheme]
t_final = 0.1

[data]
kind = "random_steps"
n_jumps = 3
amplitude = 0.02

[experiment]
n_runs = 2
nu_ladder = [0.02, 0.01]
nu_fine = 0.01
perturbation_ladder = [0.0, 0.01]
offsets = [0.01]
R = 0.3
tau = 0.05
grid_n = 3
sample_dt = 0.01
n_samples = 40
"""

HOLDER_TOML = """
seed = 3

[data]
kind = "constant"

[experiment]
nu_ladder = [0.02, 0.01]
nu_fine = 0.01
perturbation_ladder = [0.0, 0.02, 0.04]
R = 0.4
tau = 0.05
grid_n = 3
"""


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _config_file(tmp_path: Path, text: str, name: str = "run.toml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _invoke(*args: str):
    return runner.invoke(app, list(args))


# ---------------------------------------------------------------------------
# Lab & mapper
# ---------------------------------------------------------------------------


class TestLab:
    """Tests for building the lab from a configuration."""

    def test_defaults(self) -> None:
        lab = Lab.from_config(parse_config({}))
        assert lab.params.nu == 0.01
        assert lab.params.speed_jitter <= 0.1 * lab.params.nu
        assert lab.params.lambda_hat > 0.0
        assert lab.j > 0.0

    def test_with_nu_rescales_jitter(self) -> None:
        lab = Lab.from_config(parse_config({}))
        fine = lab.with_nu(0.001)
        assert fine.params.nu == 0.001
        assert fine.params.speed_jitter <= 0.1 * 0.001 + 1e-15
        assert fine.params.lambda_hat == lab.params.lambda_hat


class TestWorkerMap:
    """Tests for the serial/parallel map switch."""

    def test_serial(self) -> None:
        with worker_map(1) as mapper:
            assert list(mapper(abs, [-1, 2, -3])) == [1, 2, 3]

    def test_zero_jobs_rejected(self) -> None:
        with pytest.raises(UsageError):
            with worker_map(0):
                pass


# ---------------------------------------------------------------------------
# run_riemann
# ---------------------------------------------------------------------------


class TestRunRiemann:
    """Tests for the Riemann dump."""

    def test_equal_states_give_empty_fan(self, tmp_path: Path) -> None:
        config = parse_config({})
        writer = RunWriter(tmp_path, "hash")
        result = run_riemann(config, writer)
        assert result.passed
        fan_csv = (tmp_path / "riemann_fan.csv").read_text(encoding="utf-8").splitlines()
        assert fan_csv == ["family,kind,sigma,speed_low,speed_high,tau_R,w_R,E_R"]
        curves = (tmp_path / "wave_curves.csv").read_text(encoding="utf-8").splitlines()
        assert len(curves) == 1 + 3 * config.riemann.curve_samples

    def test_two_shock_problem(self, tmp_path: Path) -> None:
        config = parse_config({"riemann": {"left": [1.0, 0.0, 2.5], "right": [1.0, -0.03, 2.5]}})
        result = run_riemann(config, RunWriter(tmp_path, "hash"))
        assert result.passed
        document = json.loads((tmp_path / "riemann.json").read_text(encoding="utf-8"))
        assert document["violations"] == []
        assert document["config_hash"] == "hash"
        kinds = {(w["family"], w["kind"]) for w in document["waves"]}
        assert (1, "shock") in kinds
        assert (3, "shock") in kinds


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class TestCliOptions:
    """Tests for global options and error mapping."""

    def test_version(self) -> None:
        result = _invoke("--version")
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_help_lists_commands(self) -> None:
        result = _invoke("--help")
        assert result.exit_code == 0
        for command in ("riemann", "evolve", "validate", "holder", "calibrate"):
            assert command in result.output

    def test_missing_config_exits_2(self, tmp_path: Path) -> None:
        result = _invoke("riemann", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "out"))
        assert result.exit_code == 2

    def test_unknown_key_exits_2(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, "[scheme]\nnu = 0.01\nwobble = 1\n")
        result = _invoke("riemann", "--config", str(path), "--out", str(tmp_path / "out"))
        assert result.exit_code == 2

    def test_incomplete_data_exits_2(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, '[data]\nkind = "riemann"\n')
        result = _invoke("evolve", "--config", str(path), "--out", str(tmp_path / "out"))
        assert result.exit_code == 2

    def test_empty_checks_exit_2(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, "[experiment]\nchecks = []\n")
        result = _invoke("validate", "--config", str(path), "--out", str(tmp_path / "out"))
        assert result.exit_code == 2

    def test_error_as_json(self, tmp_path: Path) -> None:
        result = _invoke("riemann", "--config", str(tmp_path / "nope.toml"), "--json")
        assert result.exit_code == 2
        assert '"error": "ConfigurationError"' in result.output


class TestCliCommands:
    """Tests for the artifacts written by the subcommands."""

    def test_riemann_json_summary(self, tmp_path: Path) -> None:
        out = tmp_path / "out"
        result = _invoke("riemann", "--out", str(out), "--json")
        assert result.exit_code == 0
        assert '"command": "riemann"' in result.output
        assert (out / "riemann.json").is_file()

    def test_evolve_writes_trajectory(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, EVOLVE_TOML)
        out = tmp_path / "out"
        result = _invoke("evolve", "--config", str(path), "--out", str(out))
        assert result.exit_code == 0
        document = json.loads((out / "trajectory.json").read_text(encoding="utf-8"))
        assert document["schema_version"] == 1
        assert len(document["config_hash"]) == 64
        for name in ("profile_000.csv", "profile_001.csv", "profile_002.csv", "glimm.csv"):
            assert (out / name).is_file()

    def test_seed_override_changes_hash(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, EVOLVE_TOML)
        _invoke("evolve", "--config", str(path), "--out", str(tmp_path / "a"))
        _invoke("evolve", "--config", str(path), "--seed", "4", "--out", str(tmp_path / "b"))
        first = json.loads((tmp_path / "a" / "trajectory.json").read_text(encoding="utf-8"))
        second = json.loads((tmp_path / "b" / "trajectory.json").read_text(encoding="utf-8"))
        assert first["config_hash"] != second["config_hash"]

    def test_seeded_runs_are_byte_identical(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, RANDOM_TOML)
        for name in ("a", "b"):
            result = _invoke("evolve", "--config", str(path), "--out", str(tmp_path / name))
            assert result.exit_code == 0
        for artifact in ("trajectory.json", "glimm.csv", "profile_000.csv"):
            assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()

    def test_validate_riemann_check(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, '[experiment]\nchecks = ["riemann"]\n')
        out = tmp_path / "out"
        result = _invoke("validate", "--config", str(path), "--out", str(out))
        assert result.exit_code == 0
        document = json.loads((out / "validate.json").read_text(encoding="utf-8"))
        assert document["passed"] is True
        assert [c["name"] for c in document["checks"]] == ["riemann"]


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


class TestValidateChecks:
    """Tests for each invariant check run through the CLI."""

    @pytest.mark.parametrize(
        "check, names",
        [
            ("glimm", ["weight_decay", "tracking"]),
            ("weights", ["weight_ratios"]),
            ("phi", ["phi_equivalence", "phi_nu_sweep", "phi_shifted"]),
            ("contact", ["contact_dissipation"]),
            ("shock", ["shock_dissipation"]),
            ("ledger", ["ledger", "entropy_production"]),
            ("rarefaction", ["rarefaction_1", "rarefaction_3"]),
        ],
    )
    def test_check_writes_reports(self, tmp_path: Path, check: str, names: list[str]) -> None:
        path = _config_file(tmp_path, CHECKS_TOML.replace("n_runs = 2", f'n_runs = 2\nchecks = ["{check}"]'))
        out = tmp_path / "out"
        result = _invoke("validate", "--config", str(path), "--out", str(out))
        document = json.loads((out / "validate.json").read_text(encoding="utf-8"))
        assert [c["name"] for c in document["checks"]] == names
        assert all(isinstance(c["passed"], bool) for c in document["checks"])
        assert document["passed"] == all(c["passed"] for c in document["checks"])
        assert result.exit_code == (0 if document["passed"] else 1)

    def test_glimm_calibrates_kappa_from_configured(self, tmp_path: Path) -> None:
        config = parse_config(
            {
                "seed": 5,
                "scheme": {"t_final": 0.1, "kappa": 0.0},
                "data": {"kind": "random_steps", "n_jumps": 3, "amplitude": 0.02},
                "experiment": {"checks": ["glimm"], "n_runs": 2},
            }
        )
        run_validate(config, RunWriter(tmp_path, "hash"))
        document = json.loads((tmp_path / "validate.json").read_text(encoding="utf-8"))
        details = document["checks"][0]["details"]
        assert details["kappa_configured"] == 0.0
        assert details["kappa_tried"][0] == 0.0
        assert details["kappa_used"] == details["kappa_tried"][-1]
        assert details["kappa_used"] >= details["kappa_configured"]


# ---------------------------------------------------------------------------
# holder
# ---------------------------------------------------------------------------


class TestRunHolder:
    """Tests for the stability experiment command."""

    def test_missing_reference_names_stage(self, tmp_path: Path) -> None:
        config = parse_config({"experiment": {"reference": "none"}})
        with pytest.raises(StageError) as info:
            run_holder(config, RunWriter(tmp_path, "hash"))
        assert info.value.stage == "reference"
        assert info.value.exit_code == 2

    def test_missing_reference_exits_2(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, '[experiment]\nreference = "none"\n')
        result = _invoke("holder", "--config", str(path), "--out", str(tmp_path / "out"), "--json")
        assert result.exit_code == 2
        assert '"stage": "reference"' in result.output

    def test_holder_writes_every_nu_rung(self, tmp_path: Path) -> None:
        path = _config_file(tmp_path, HOLDER_TOML)
        out = tmp_path / "out"
        result = _invoke("holder", "--config", str(path), "--out", str(out))
        document = json.loads((out / "holder.json").read_text(encoding="utf-8"))
        assert result.exit_code == (0 if document["passed"] else 1)
        assert document["nu"] == 0.01
        assert [rung["nu"] for rung in document["rungs"]] == [0.02, 0.01]
        assert [row["perturbation"] for row in document["rows"]] == [0.0, 0.02, 0.04]
        refinement = document["nu_refinement"]
        assert refinement["nus"] == [0.02, 0.01]
        assert len(refinement["changes"]) == 1
        assert refinement["fit"] is None
        assert document["passed"] == (document["exponent_ok"] and refinement["passed"] and all(
            all(row["checks"].values()) for row in document["rows"]
        ))
        lines = (out / "holder.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("nu,perturbation,l2_initial")
        assert len(lines) == 1 + 2 * 3
