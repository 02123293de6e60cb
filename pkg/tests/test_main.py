"""Tests for the command-line front-end."""
import json
import os

import pytest

import main
from config import Config
from services.result_writer import read_document
from utils.exceptions import IllConditioned


def run_cli(capsys, argv):
    code = main.main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_spectrum_from_flags(capsys, output_dir):
    code, summary = run_cli(capsys, ["spectrum", "--problem", "free-line", "--alpha", "2"])
    assert code == 0
    assert summary["states"][0]["E_star"] == pytest.approx(-1.0, abs=1e-10)
    assert summary["result"] == os.path.join(str(output_dir), "spectrum.json")
    assert read_document(summary["result"]).command == "spectrum"


def test_run_named_experiment(capsys, config_dir, tmp_path):
    path = os.path.join(config_dir, "accept03_free_line_spectrum.ini")
    code, summary = run_cli(capsys, ["run", path, "--output-dir", str(tmp_path)])
    assert code == 0
    assert os.path.basename(summary["result"]) == "accept03_free_line_spectrum.json"


def test_run_applies_flag_overrides(capsys, config_dir):
    path = os.path.join(config_dir, "accept03_free_line_spectrum.ini")
    code, summary = run_cli(capsys, ["run", path, "--tol", "1e-8", "--alpha", "4"])
    assert code == 0
    assert summary["states"][0]["E_star"] == pytest.approx(-4.0, abs=1e-7)
    document = read_document(summary["result"])
    assert document.config["solver"]["tol"] == 1e-8
    assert document.config["perturbation"]["alpha"] == 4.0
    assert summary["result"].endswith("accept03_free_line_spectrum.json")


def test_flags_override_config_file(capsys, config_dir):
    path = os.path.join(config_dir, "accept03_free_line_spectrum.ini")
    code, summary = run_cli(capsys, ["spectrum", "--config", path, "--alpha", "4", "--name", "stronger"])
    assert code == 0
    assert summary["states"][0]["E_star"] == pytest.approx(-4.0, abs=1e-9)
    assert summary["result"].endswith("stronger.json")


def test_unknown_problem_is_config_error(capsys):
    code, record = run_cli(capsys, ["spectrum", "--problem", "double-well", "--alpha", "1"])
    assert code == 1
    assert record["error"] == "config_error"
    assert record["context"]["problems"]


def test_missing_perturbation_is_config_error(capsys):
    code, record = run_cli(capsys, ["spectrum", "--problem", "free-line"])
    assert code == 1
    assert record["error"] == "config_error"


def test_solver_failure_exit_code(capsys):
    code, record = run_cli(capsys, ["curve", "--problem", "free-plane", "--shape", "circle",
                                    "--radius", "0.5", "--alpha", "-1"])
    assert code == 2
    assert record["error"] == "no_root_in_window"


def test_solver_error_record(capsys, mocker):
    mocker.patch("main.run_experiment", side_effect=IllConditioned("singular matrix", {"condition": 1e17}))
    code, record = run_cli(capsys, ["spectrum", "--problem", "free-line", "--alpha", "2"])
    assert code == 2
    assert record == {"error": "ill_conditioned", "message": "singular matrix", "context": {"condition": 1e17}}


def test_invalid_environment(capsys, monkeypatch):
    monkeypatch.setattr(Config, "HBAR", -1.0)
    code, record = run_cli(capsys, ["spectrum", "--problem", "free-line", "--alpha", "2"])
    assert code == 1
    assert record["context"]["keys"] == ["HBAR"]


def test_collect_overrides_maps_flags():
    args = main.build_parser().parse_args(
        ["renorm", "--problem", "torus", "--mu2", "1", "--support", "0,0", "--refine", "--no-csv"])
    overrides = main.collect_overrides(args)
    assert overrides["problem.label"] == "torus"
    assert overrides["perturbation.mu2"] == 1.0
    assert overrides["solver.refine"] is True
    assert overrides["output.csv"] is False


def test_subcommand_implies_perturbation_kind():
    args = main.build_parser().parse_args(["multicenter", "--problem", "free-line",
                                           "--points", "-1; 1", "--alphas", "2, 2"])
    config = main.build_config(args)
    assert config.perturbation.kind == "centers"
    assert config.experiment.name == "multicenter"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main.main(["--version"])
    assert exc.value.code == 0
    assert "deltaspec" in capsys.readouterr().out
