"""Tests for the fracspde-cli entry point."""

import json

import pytest

from fracspde import verify
from fracspde.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from fracspde.config import ENV_OUTPUT_DIR
from fracspde.export import read_csv
from fracspde.verify import CriterionResult


@pytest.fixture(autouse=True)
def no_env_output(monkeypatch):
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)


def run(*argv):
    return main(["--no-color", *argv])


class TestBasics:
    def test_version(self, capsys):
        assert run("--version") == EXIT_OK
        assert "fracspde" in capsys.readouterr().out

    def test_no_command_prints_help(self, capsys):
        assert run() == EXIT_OK
        assert "sample-noise" in capsys.readouterr().out

    def test_info(self, capsys):
        assert run("info") == EXIT_OK
        out = capsys.readouterr().out
        assert "numpy" in out and "deterministic" in out

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            run("verify", "--bogus")
        assert info.value.code == EXIT_USAGE


class TestSampleNoise:
    def test_files_and_summary(self, tmp_path):
        out = tmp_path / "noise"
        code = run("sample-noise", "--family", "fbm", "--H", "0.7", "--n", "16", "--paths", "3",
                   "--seed", "7", "-o", str(out))
        assert code == EXIT_OK
        assert sorted(p.name for p in out.glob("path_*.csv")) == [
            "path_0000.csv", "path_0001.csv", "path_0002.csv"
        ]
        assert read_csv(out / "path_0001.csv").shape == (17, 2)
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["checkpoints"]) == 10
        assert summary["checkpoints"][4]["analytic"] == pytest.approx(1.0)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 7
        assert manifest["config"]["noise.H"] == 0.7

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ("sample-noise", "--n", "16", "--paths", "2", "--seed", "3", "-o", str(tmp_path))
        run(*args)
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        run(*args)
        assert first == {p.name: p.read_bytes() for p in tmp_path.iterdir()}

    def test_hermite_paths(self, tmp_path):
        code = run("sample-noise", "--family", "hermite", "--H", "0.7", "--q", "2", "--n", "8",
                   "--paths", "2", "--m-inner", "64", "-o", str(tmp_path))
        assert code == EXIT_OK

    def test_invalid_parameter(self, tmp_path, capsys):
        assert run("sample-noise", "--H", "1.5", "-o", str(tmp_path)) == EXIT_USAGE
        assert "H=1.5" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run("sample-noise", "--config", str(tmp_path / "nope.yaml")) == EXIT_USAGE

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "env"))
        assert run("sample-noise", "--n", "8", "--paths", "1") == EXIT_OK
        assert (tmp_path / "env" / "manifest.json").exists()


class TestVerify:
    def test_passing_suite(self, tmp_path):
        assert run("verify", "--suite", "operator", "--quick", "-o", str(tmp_path)) == EXIT_OK
        report = json.loads((tmp_path / "verify_report.json").read_text())
        assert report["passed"] is True
        assert report["suites"][0]["name"] == "operator"

    def test_unknown_suite(self, tmp_path):
        assert run("verify", "--suite", "spectra", "-o", str(tmp_path)) == EXIT_USAGE

    def test_failure_names_criterion(self, tmp_path, monkeypatch, capsys):
        def failing(settings):
            return [CriterionResult("variance matches", False, 2.0, target=1.0)]

        monkeypatch.setitem(verify.SUITES, "failing", {"func": failing, "description": "fails"})
        assert run("verify", "--suite", "failing", "-o", str(tmp_path)) == EXIT_FAILURE
        assert "variance matches" in capsys.readouterr().err


class TestSolve:
    def test_scalar_model(self, tmp_path):
        code = run("solve", "--model", "scalar-test", "--scheme", "exponential", "--n", "32",
                   "--ensemble", "2", "-o", str(tmp_path))
        assert code == EXIT_OK
        assert read_csv(tmp_path / "solution_0001_u.csv").shape == (33, 2)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert "solution_0000_energy.csv" in manifest["files"]

    def test_neuron_model(self, tmp_path):
        code = run("solve", "--model", "neuron", "--n-x", "8", "--J", "4", "--n", "32",
                   "--ensemble", "2", "--seed", "1", "-o", str(tmp_path))
        assert code == EXIT_OK
        quantiles = read_csv(tmp_path / "soma_quantiles.csv")
        assert quantiles.shape == (33, 4)
        experiment = json.loads((tmp_path / "experiment.json").read_text())
        assert experiment["ensemble"] == 2
        assert (tmp_path / "path_0000_u.csv").exists()

    def test_yosida_requires_alpha(self, tmp_path):
        assert run("solve", "--scheme", "yosida", "-o", str(tmp_path)) == EXIT_USAGE

    def test_config_file(self, tmp_path):
        config = tmp_path / "run.yaml"
        config.write_text(
            "model:\n  kind: scalar-test\ngrid:\n  n: 16\nrun:\n  ensemble: 1\n"
        )
        out = tmp_path / "out"
        assert run("solve", "--config", str(config), "-o", str(out)) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["grid.n"] == 16
