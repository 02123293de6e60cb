"""Tests for experiment configuration files and builders."""
import os

import numpy as np
import pytest

from services.curve import CurveSupport
from services.experiment_config import (
    build_curve,
    build_perturbation,
    build_problem,
    load_experiment,
    parse_floats,
    parse_point,
    parse_points,
    subcommand_names,
    validate_experiment,
)
from services.krein import PointPerturbation
from services.multicenter import CenterSet
from services.renorm import RenormalizedPerturbation
from utils.exceptions import ConfigError


def write_ini(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_parse_point():
    assert parse_point("1.5") == 1.5
    assert parse_point("0.3, 0.2") == [0.3, 0.2]
    assert parse_point("0.3 0.2") == [0.3, 0.2]
    assert parse_point(None) is None
    assert parse_point([2.0]) == 2.0


def test_parse_points_and_floats():
    assert parse_points("-1; 1") == [-1.0, 1.0]
    assert parse_points("0, 0; 1, 0;") == [[0.0, 0.0], [1.0, 0.0]]
    assert parse_floats("1e-3, 3e-3 1e-2") == [0.001, 0.003, 0.01]
    assert parse_floats(2) == [2.0]


def test_subcommands():
    assert subcommand_names() == ["spectrum", "green", "perturb", "scatter", "renorm",
                                  "multicenter", "curve", "secular"]


def test_load_named_experiment(config_dir):
    config = load_experiment(os.path.join(config_dir, "accept01_reflectionless_center.ini"))
    assert config.experiment.command == "spectrum"
    assert config.experiment.name == "accept01_reflectionless_center"
    assert config.problem.label == "reflectionless"
    assert config.perturbation.alpha == 0.5
    assert config.output.profile is True
    assert config.stem == "accept01_reflectionless_center"


def test_every_shipped_config_validates(config_dir):
    names = sorted(f for f in os.listdir(config_dir) if f.endswith(".ini"))
    assert names
    for name in names:
        config = load_experiment(os.path.join(config_dir, name))
        problem = build_problem(config.problem)
        if config.perturbation is not None:
            build_perturbation(config.perturbation, problem)


def test_overrides_win_over_file(config_dir):
    config = load_experiment(os.path.join(config_dir, "accept01_reflectionless_center.ini"),
                             {"perturbation.alpha": 0.75, "output.name": "override"})
    assert config.perturbation.alpha == 0.75
    assert config.stem == "override"


def test_missing_file():
    with pytest.raises(ConfigError):
        load_experiment("/nonexistent/experiment.ini")


def test_unknown_key_rejected(tmp_path):
    path = write_ini(tmp_path, "bad.ini", "[experiment]\ncommand = spectrum\n[problem]\nlabel = free-line\nwidth = 2\n")
    with pytest.raises(ConfigError) as exc:
        load_experiment(path)
    fields = [p["field"] for p in exc.value.context["problems"]]
    assert "problem.width" in fields


def test_unknown_section_rejected(tmp_path):
    path = write_ini(tmp_path, "bad.ini", "[experiment]\ncommand = spectrum\n[problem]\nlabel = free-line\n[plot]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_experiment(path)


def test_malformed_ini(tmp_path):
    path = write_ini(tmp_path, "broken.ini", "command = spectrum\n")
    with pytest.raises(ConfigError):
        load_experiment(path)


def test_bad_override_key():
    with pytest.raises(ConfigError):
        validate_experiment({"experiment": {"command": "spectrum"}}, {"alpha": 1.0})


@pytest.mark.parametrize("perturbation", [
    {"kind": "point"},
    {"kind": "renormalized"},
    {"kind": "centers", "points": "-1; 1", "alphas": "2"},
    {"kind": "curve", "alpha": 1.0, "shape": "circle"},
    {"kind": "curve", "alpha": 1.0, "shape": "ellipse", "a": 1.0},
    {"kind": "curve", "alpha": 1.0, "shape": "polyline"},
    {"kind": "barrier", "alpha": 1.0},
])
def test_incomplete_perturbations_rejected(perturbation):
    raw = {"experiment": {"command": "spectrum"}, "problem": {"label": "free-line"}, "perturbation": perturbation}
    with pytest.raises(ConfigError):
        validate_experiment(raw)


def test_unknown_problem_and_command():
    with pytest.raises(ConfigError):
        validate_experiment({"experiment": {"command": "spectrum"}, "problem": {"label": "double-well"}})
    with pytest.raises(ConfigError):
        validate_experiment({"experiment": {"command": "plot"}, "problem": {"label": "free-line"}})


def test_solver_window_parsing():
    raw = {"experiment": {"command": "spectrum"}, "problem": {"label": "free-line"},
           "solver": {"emin": "-inf", "emax": "-0.5", "exponents": "2 4"}}
    solver = validate_experiment(raw).solver
    assert solver.window == (float("-inf"), -0.5)
    assert solver.exponents == [2.0, 4.0]
    assert validate_experiment({"experiment": {"command": "spectrum"},
                                "problem": {"label": "free-line"}}).solver.window is None


def test_missing_catalog_parameters_rejected():
    with pytest.raises(ConfigError) as exc:
        validate_experiment({"experiment": {"command": "renorm"}, "problem": {"label": "torus", "L1": 2.0}})
    assert "L2" in exc.value.context["problems"][0]["message"]
    with pytest.raises(ConfigError):
        validate_experiment({"experiment": {"command": "spectrum"}, "problem": {"label": "harmonic"}})


def test_torus_sides_from_config():
    config = validate_experiment({"experiment": {"command": "renorm"},
                                  "problem": {"label": "torus", "L1": 1.0, "L2": 2.0}})
    assert config.problem.parameters() == {"L1": 1.0, "L2": 2.0}
    assert config.problem.dimension == 2
    assert build_problem(config.problem).area == pytest.approx(2.0)


def test_units_from_config():
    config = validate_experiment({"experiment": {"command": "spectrum"},
                                  "problem": {"label": "harmonic", "omega": 2.0, "hbar": 1.0, "mass": 1.0}})
    problem = build_problem(config.problem)
    assert problem.units.kinetic == pytest.approx(0.5)
    assert problem.discrete_energies(2) == pytest.approx([1.0, 3.0])


def test_build_perturbations():
    base = {"experiment": {"command": "spectrum"}, "problem": {"label": "free-line"}}
    point = validate_experiment({**base, "perturbation": {"alpha": 2.0}})
    problem = build_problem(point.problem)
    built = build_perturbation(point.perturbation, problem)
    assert isinstance(built, PointPerturbation)
    assert built.support == 0.0

    centers = validate_experiment({**base, "perturbation": {"kind": "centers", "points": "-1; 1", "alphas": "2, 3"}})
    assert isinstance(build_perturbation(centers.perturbation, problem), CenterSet)

    plane = {"experiment": {"command": "renorm"}, "problem": {"label": "free-plane"}}
    renorm = validate_experiment({**plane, "perturbation": {"kind": "renormalized", "mu2": 1.0}})
    built = build_perturbation(renorm.perturbation, build_problem(renorm.problem))
    assert isinstance(built, RenormalizedPerturbation)
    assert np.allclose(built.support, [0.0, 0.0])


def test_build_curve_shapes():
    base = {"experiment": {"command": "curve"}, "problem": {"label": "free-plane"}}
    config = validate_experiment({**base, "perturbation": {
        "kind": "curve", "alpha": 1.0, "shape": "polyline", "vertices": "0, 0; 1, 0; 1, 1", "closed": "false",
        "order": "8"}})
    curve = build_curve(config.perturbation)
    assert isinstance(curve, CurveSupport)
    assert curve.closed is False
    assert curve.order == 8
    assert curve.length == pytest.approx(2.0)

    config = validate_experiment({**base, "perturbation": {
        "kind": "curve", "alpha": 1.0, "shape": "ellipse", "a": 2.0, "b": 1.0, "center": "1, 1"}})
    curve, alpha = build_perturbation(config.perturbation, build_problem(config.problem))
    assert curve.radii == (2.0, 1.0)
    assert curve.center == (1.0, 1.0)
    assert alpha == 1.0


def test_echo_is_plain_data(config_dir):
    config = load_experiment(os.path.join(config_dir, "accept05_pole_cancellation_torus.ini"))
    echo = config.echo()
    assert echo["problem"]["label"] == "torus"
    assert echo["solver"]["x"] == pytest.approx([np.pi, np.pi])
    assert "kappa" not in echo["problem"]
