"""Tests for result documents and CSV series."""
import json
import os

import numpy as np
import pandas as pd
import pytest

from services.result_writer import (
    ResultDocument,
    RunRecorder,
    read_document,
    series_frame,
    to_plain,
    write_csv,
    write_json,
)


def test_to_plain_converts_solver_values():
    value = {
        "z": 1.5 - 2j,
        "arr": np.array([1.0, np.inf]),
        "n": np.int64(3),
        "bad": float("nan"),
        "low": -np.inf,
        "nested": ({"k": np.float64(0.25)},),
    }
    assert to_plain(value) == {
        "z": {"re": 1.5, "im": -2.0},
        "arr": [1.0, "inf"],
        "n": 3,
        "bad": "nan",
        "low": "-inf",
        "nested": [{"k": 0.25}],
    }


def test_document_carries_tool_and_version():
    data = ResultDocument(command="spectrum", config={"problem": {"label": "free-line"}},
                          states=[{"E": -1.0}]).to_dict()
    assert data["tool"] == "deltaspec"
    assert data["version"]
    assert data["states"] == [{"E": -1.0}]


def test_non_finite_values_survive_json():
    doc = ResultDocument(command="green", config={}, residuals={"variation": float("inf")})
    assert json.loads(doc.to_json())["residuals"]["variation"] == "inf"


def test_csv_keeps_full_precision(tmp_path):
    frame = series_frame(["x", "re"], [[0.1, 1 / 3], [0.2, -2.0]])
    path = write_csv(str(tmp_path / "profile.csv"), frame)
    with open(path, encoding="utf-8", newline="") as handle:
        text = handle.read()
    assert text.splitlines()[0] == "x,re"
    assert "\r" not in text
    assert "0.33333333333333331" in text
    assert float(pd.read_csv(path, float_precision="round_trip")["re"].iloc[0]) == 1 / 3


def test_empty_series_keeps_header(tmp_path):
    path = write_csv(str(tmp_path / "empty.csv"), series_frame(["k", "R", "T"], []))
    with open(path, encoding="utf-8") as handle:
        assert handle.read().strip() == "k,R,T"


def test_write_json_creates_directory(tmp_path):
    path = write_json(str(tmp_path / "nested" / "out.json"), {"value": 1j})
    with open(path, encoding="utf-8") as handle:
        assert json.load(handle) == {"value": {"re": 0.0, "im": 1.0}}
    assert not [f for f in os.listdir(tmp_path / "nested") if f.startswith(".tmp-")]


def test_recorder_uses_environment_directory(output_dir):
    recorder = RunRecorder("spectrum", "demo")
    assert recorder.output_dir == str(output_dir)
    assert recorder.path("", "json") == os.path.join(str(output_dir), "demo.json")
    assert recorder.path("profile", "csv") == os.path.join(str(output_dir), "demo_profile.csv")


def test_recorder_writes_document_and_series(tmp_path):
    recorder = RunRecorder("scatter", "run", str(tmp_path))
    recorder.start_timer()
    recorder.add_series("scattering", series_frame(["k", "unitarity"], [[1.0, 0.0]]))
    recorder.add_sidecar("poles", {"poles": [1.0, 4.0]})
    path = recorder.finish(ResultDocument(command="scatter", config={"name": "run"}, residuals={"unitarity": 1e-15}))

    doc = read_document(path)
    assert doc.command == "scatter"
    assert doc.series == {"scattering": "run_scattering.csv", "poles": "run_poles.json"}
    assert doc.residuals["unitarity"] == pytest.approx(1e-15)
    assert doc.wall_time_s >= 0
    assert doc.timestamp
    assert os.path.exists(tmp_path / "run_scattering.csv")
