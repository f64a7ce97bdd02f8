"""
Unit tests for the command-line interface

Tests cover:
- coherence and bounds commands
- estimate command with JSON output
- experiment command outputs, seeds and overrides
- verify command verdicts and exit codes
- Error-to-exit-code mapping
"""

import importlib
import json

import pytest
import numpy as np

import sys
from pathlib import Path

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from src.cli.main import apply_overrides, main, resolve_seed
from src.sparse_guarantees.config import LOG_FILE_NAME, SEED_ENV_VAR
from src.sparse_guarantees.dictionary import build_two_ortho_hadamard
from src.sparse_guarantees.errors import ConfigError, NoConvergenceError

# src.cli re-exports main(), which shadows the submodule for dotted patch targets
cli_main = importlib.import_module("src.cli.main")


def _write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def measurement(tmp_path):
    """Noiseless b for x0 = 1.0 e_1 - 0.8 e_9 on the 8 x 16 two-ortho dictionary."""
    dictionary = build_two_ortho_hadamard(8)
    x0 = np.zeros(16)
    x0[1], x0[9] = 1.0, -0.8
    path = tmp_path / "b.csv"
    path.write_text("\n".join(repr(float(v)) for v in dictionary.matrix @ x0) + "\n", encoding="utf-8")
    return str(path), x0


@pytest.fixture
def experiment_config(tmp_path):
    return _write_json(tmp_path / "experiment.json", {
        "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
        "estimators": [{"kind": "oracle"}, {"kind": "omp"}],
        "signal": {"s": 2, "magnitude_mode": "gaussian-normalized", "support_mode": "random"},
        "noise_variances": [1e-4, 1e-2],
        "trials": 5,
        "master_seed": 1,
    })


class TestCoherenceCommand:
    """Test suite for the coherence command."""

    def test_two_ortho_512(self, capsys):
        assert main(["coherence", "--two-ortho-hadamard", "512"]) == 0
        out = capsys.readouterr().out
        assert "mu = 0.0441942" in out
        assert "\n 12 " in out

    def test_exact_constants(self, capsys):
        assert main(["coherence", "--random-gaussian", "6", "10", "--exact-s", "2", "--seed", "4"]) == 0
        assert "(exhaustive)" in capsys.readouterr().out

    def test_json_output(self, tmp_path):
        assert main(["coherence", "--two-ortho-hadamard", "16", "--output-dir", str(tmp_path)]) == 0
        result = json.loads((tmp_path / "coherence.json").read_text(encoding="utf-8"))
        assert result["mu"] == pytest.approx(0.25)
        assert len(result["bounds"]) == 12
        assert (tmp_path / LOG_FILE_NAME).exists()

    def test_missing_source(self, capsys):
        assert main(["coherence"]) == 1
        assert "dictionary source" in capsys.readouterr().err

    def test_bad_size(self, capsys):
        assert main(["coherence", "--two-ortho-hadamard", "12"]) == 1
        assert capsys.readouterr().err.startswith("error:")


class TestBoundsCommand:
    """Test suite for the bounds command."""

    def test_constants_at_s7(self, tmp_path, capsys):
        argv = ["bounds", "--mu", "0.0441942", "--s", "7", "--m", "1024", "--sigma", "1", "--alpha", "0",
                "--output-dir", str(tmp_path)]
        assert main(argv) == 0
        result = json.loads((tmp_path / "bounds.json").read_text(encoding="utf-8"))
        assert 361.5 <= result["reports"]["dantzig"]["bound_coefficient"] <= 362.5
        assert 3.69 <= result["reports"]["omp"]["bound_coefficient"] <= 3.71
        assert result["alpha_for_half_probability"]["dantzig"] == 0.0
        assert "OMP condition holds for sigma <=" in capsys.readouterr().out

    def test_from_dictionary(self, capsys):
        assert main(["bounds", "--two-ortho-hadamard", "64", "--s", "2", "--sigma", "0.01"]) == 0
        assert "mu = 0.125" in capsys.readouterr().out

    def test_mu_needs_m(self):
        assert main(["bounds", "--mu", "0.1", "--s", "2", "--sigma", "1"]) == 1

    def test_usage_error(self, capsys):
        assert main(["bounds", "--s", "two"]) == 1
        assert "error:" in capsys.readouterr().err


class TestEstimateCommand:
    """Test suite for the estimate command."""

    def _run(self, tmp_path, config):
        path = _write_json(tmp_path / "estimate.json", config)
        out = tmp_path / "out"
        code = main(["estimate", "--config", path, "--output-dir", str(out)])
        result = json.loads((out / "estimate.json").read_text(encoding="utf-8")) if code == 0 else None
        return code, result

    def test_oracle_recovers(self, tmp_path, measurement):
        b_path, x0 = measurement
        code, result = self._run(tmp_path, {
            "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
            "b_path": b_path,
            "estimator": "oracle",
            "support": [1, 9],
        })
        assert code == 0
        assert np.allclose(result["estimate"]["coefficients"], x0, atol=1e-12)
        assert result["estimate"]["detected_support"] == [1, 9]

    def test_bpdn_with_selected_gamma(self, tmp_path, measurement):
        b_path, _ = measurement
        code, result = self._run(tmp_path, {
            "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
            "b_path": b_path,
            "estimator": "bpdn",
            "sigma": 0.001,
            "s": 2,
            "x_min": 0.8,
            "x_max": 1.0,
        })
        assert code == 0
        assert result["parameters"]["gamma"] > 0
        assert result["estimate"]["diagnostics"]["duality_gap"] <= 1e-8
        assert result["guarantee"]["estimator"] == "bpdn"

    def test_dantzig_with_selected_tau(self, tmp_path, measurement):
        b_path, _ = measurement
        code, result = self._run(tmp_path, {
            "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
            "b_path": b_path,
            "estimator": "dantzig",
            "sigma": 0.001,
            "s": 2,
        })
        assert code == 0
        assert result["estimate"]["diagnostics"]["feasibility_residual"] <= 1e-8
        assert result["guarantee"] is None

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["estimate", "--config", str(tmp_path / "missing.json")]) == 1
        assert "Config file not found" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, measurement, capsys):
        b_path, _ = measurement
        path = _write_json(tmp_path / "bad.json", {
            "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
            "b_path": b_path,
            "estimator": "omp",
        })
        assert main(["estimate", "--config", path]) == 1
        err = capsys.readouterr().err
        assert "invalid config" in err
        assert len(err.strip().splitlines()) == 1

    def test_solver_failure_exit_code(self, tmp_path, measurement, mocker):
        mocker.patch.object(cli_main, "run_estimator", side_effect=NoConvergenceError("stalled", iterations=5))
        b_path, _ = measurement
        code, _ = self._run(tmp_path, {
            "dictionary": {"kind": "two_ortho_hadamard", "n": 8},
            "b_path": b_path,
            "estimator": "omp",
            "s": 2,
        })
        assert code == 2


class TestExperimentCommand:
    """Test suite for the experiment command."""

    def test_outputs(self, tmp_path, experiment_config, capsys):
        out = tmp_path / "run"
        assert main(["experiment", "mse-snr", "--config", experiment_config, "--output-dir", str(out)]) == 0
        assert {p.name for p in out.iterdir()} >= {"trials.csv", "table.csv", "manifest.json", LOG_FILE_NAME}
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["experiment"] == "mse-snr"
        assert manifest["master_seed"] == 1
        assert len((out / "trials.csv").read_text(encoding="utf-8").splitlines()) == 1 + 2 * 5 * 2
        assert "Experiment Summary" in capsys.readouterr().out

    def test_threads_byte_identical(self, tmp_path, experiment_config):
        one, three = tmp_path / "one", tmp_path / "three"
        assert main(["experiment", "mse-snr", "--config", experiment_config, "--output-dir", str(one), "--threads", "1"]) == 0
        assert main(["experiment", "mse-snr", "--config", experiment_config, "--output-dir", str(three), "--threads", "3"]) == 0
        assert (one / "trials.csv").read_bytes() == (three / "trials.csv").read_bytes()
        assert (one / "table.csv").read_bytes() == (three / "table.csv").read_bytes()

    def test_seed_and_override(self, tmp_path, experiment_config):
        out = tmp_path / "run"
        argv = ["experiment", "mse-snr", "--config", experiment_config, "--output-dir", str(out),
                "--seed", "9", "--set", "trials=2"]
        assert main(argv) == 0
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["master_seed"] == 9
        assert manifest["config"]["trials"] == 2

    def test_wrong_kind_for_signals(self, tmp_path, experiment_config, capsys):
        assert main(["experiment", "median", "--config", experiment_config, "--output-dir", str(tmp_path)]) == 1
        assert "fixed-profile" in capsys.readouterr().err


class TestVerifyCommand:
    """Test suite for the verify command."""

    SMALL = [
        "--set", "coherence_sizes=[16]",
        "--set", "lemma_dictionaries=1",
        "--set", "lemma_n=5",
        "--set", "lemma_m=8",
        "--set", "lemma_max_s=2",
        "--set", "oracle_n=16",
        "--set", "oracle_s=2",
        "--set", "oracle_trials=200",
        "--set", "oracle_tolerance=0.5",
    ]

    def test_all_pass(self, mocker, capsys):
        mocker.patch.object(cli_main, "_check_certificates", return_value=[("certificates", True, "stubbed")])
        assert main(["verify"] + self.SMALL) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert "PASS  coherence of two-ortho n=16" in out
        assert "PASS  oracle MSE matches the CRB" in out

    def test_failure_exit_code(self, mocker, capsys):
        mocker.patch.object(cli_main, "_check_certificates", return_value=[("certificates", False, "stubbed")])
        assert main(["verify"] + self.SMALL) == 2
        assert "FAIL  certificates" in capsys.readouterr().out

    def test_normalization_warning(self, tmp_path, mocker, capsys):
        mocker.patch.object(cli_main, "_check_certificates", return_value=[])
        path = tmp_path / "raw.csv"
        path.write_text("2.0,0.0,1.0\n0.0,3.0,1.0\n", encoding="utf-8")
        main(["verify", "--set", f"dictionary_path={json.dumps(str(path))}"] + self.SMALL)
        assert "WARNING" in capsys.readouterr().out


class TestConfigPlumbing:
    """Test suite for overrides and seed resolution."""

    def test_overrides(self):
        data = {"signal": {"s": 2}, "estimators": [{"kind": "omp"}]}
        apply_overrides(data, ["signal.s=5", "estimators.0.alpha=0.5", "dictionary.kind=random_gaussian", "name=abc"])
        assert data["signal"]["s"] == 5
        assert data["estimators"][0]["alpha"] == 0.5
        assert data["dictionary"]["kind"] == "random_gaussian"
        assert data["name"] == "abc"

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            apply_overrides({}, ["no-equals-sign"])
        with pytest.raises(ConfigError):
            apply_overrides({"items": []}, ["items.3.x=1"])

    def test_seed_precedence(self, monkeypatch):
        monkeypatch.delenv(SEED_ENV_VAR, raising=False)
        assert resolve_seed(None, 4) == 4
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert resolve_seed(None, 4) == 7
        assert resolve_seed(9, 4) == 9
        monkeypatch.setenv(SEED_ENV_VAR, "seven")
        with pytest.raises(ConfigError):
            resolve_seed(None, 4)
