"""
Result documents and data series written by experiment runs.

JSON documents and CSV series are written to a temporary file in the target
directory and renamed into place, so readers never see partial output.
"""
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import Config
from utils.constants import CSV_FLOAT_FORMAT, TOOL_NAME, TOOL_VERSION
from utils.logger import get_logger

logger = get_logger(__name__)


def to_plain(value: Any) -> Any:
    """
    Convert solver output into JSON-safe data.

    Complex numbers become {"re", "im"}, numpy scalars and arrays become
    Python values, and non-finite floats become the strings "inf", "-inf", "nan".
    """
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return to_plain(value.item())
    if isinstance(value, complex):
        return {"re": to_plain(value.real), "im": to_plain(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


@dataclass
class ResultDocument:
    """One experiment's output: config echo, state table, residual checks and extras."""
    command: str
    config: Dict[str, Any]
    states: List[Dict[str, Any]] = field(default_factory=list)
    residuals: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    series: Dict[str, str] = field(default_factory=dict)
    wall_time_s: float = 0.0
    timestamp: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "command": self.command,
            "config": self.config,
            "states": self.states,
            "residuals": self.residuals,
            "extra": self.extra,
            "series": self.series,
            "wall_time_s": self.wall_time_s,
            "timestamp": self.timestamp,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ResultDocument":
        return cls(
            command=data["command"],
            config=data["config"],
            states=data.get("states", []),
            residuals=data.get("residuals", {}),
            extra=data.get("extra", {}),
            series=data.get("series", {}),
            wall_time_s=data.get("wall_time_s", 0.0),
            timestamp=data.get("timestamp", ""),
        )


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.splitext(path)[1])
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp_path, path)
    except Exception:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def write_json(path: str, payload: Dict[str, Any]) -> str:
    _atomic_write(path, json.dumps(to_plain(payload), indent=2, allow_nan=False) + "\n")
    return path


def series_frame(columns: Sequence[str], rows: Sequence[Sequence[float]]) -> pd.DataFrame:
    """Fixed-column frame for a data series; an empty row list keeps the header."""
    return pd.DataFrame(list(rows), columns=list(columns), dtype=float)


def write_csv(path: str, frame: pd.DataFrame) -> str:
    _atomic_write(path, frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"))
    return path


class RunRecorder:
    """Time one experiment and write its artifacts under an output directory."""

    def __init__(self, command: str, stem: str, output_dir: Optional[str] = None):
        self.command = command
        self.stem = stem
        self.output_dir = Config.output_dir(output_dir)
        self.start_time: Optional[float] = None
        self.series: Dict[str, str] = {}

    def start_timer(self):
        """Start the wall-clock timer."""
        self.start_time = time.time()
        logger.debug("run_timer_started", command=self.command)

    def elapsed(self) -> float:
        return 0.0 if self.start_time is None else time.time() - self.start_time

    def path(self, suffix: str, extension: str) -> str:
        name = f"{self.stem}{'_' + suffix if suffix else ''}.{extension}"
        return os.path.join(self.output_dir, name)

    def add_series(self, label: str, frame: pd.DataFrame) -> str:
        """Write a CSV series and remember it for the result document."""
        path = write_csv(self.path(label, "csv"), frame)
        self.series[label] = os.path.basename(path)
        logger.info("series_written", label=label, path=path, rows=len(frame))
        return path

    def add_sidecar(self, label: str, payload: Dict[str, Any]) -> str:
        path = write_json(self.path(label, "json"), payload)
        self.series[label] = os.path.basename(path)
        return path

    def finish(self, document: ResultDocument) -> str:
        """Stamp timing and write the JSON result document."""
        document.wall_time_s = round(self.elapsed(), 6)
        document.timestamp = datetime.now(timezone.utc).isoformat()
        document.series = dict(self.series)
        path = self.path("", "json")
        _atomic_write(path, document.to_json() + "\n")
        logger.info("result_written", command=self.command, path=path,
                    states=len(document.states), wall_time_s=document.wall_time_s)
        return path


def read_document(path: str) -> ResultDocument:
    with open(path, encoding="utf-8") as handle:
        return ResultDocument.from_dict(json.load(handle))
