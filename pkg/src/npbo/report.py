"""Measured-versus-bound records and their serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points to fit a slope")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def _plain(value):
    """Convert numpy scalars/arrays to JSON-native objects."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def format_float(value: float) -> str:
    """17 significant digits: enough to round-trip a double."""
    return format(float(value), ".17g")


@dataclass
class EstimateReport:
    """A measured quantity set against an analytic bound, with a verdict."""

    name: str
    inputs: dict[str, Any] = field(default_factory=dict)
    measurements: list[dict[str, Any]] = field(default_factory=list)
    measured: dict[str, Any] = field(default_factory=dict)
    target: dict[str, Any] = field(default_factory=dict)
    passed: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateReport":
        return cls(**data)

    def measurements_csv(self) -> str:
        """Measurement rows as CSV text, floats with 17 significant digits."""
        return rows_to_csv(self.measurements)

    def write(self, directory: Path) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        jpath = directory / f"{self.name}.json"
        cpath = directory / f"{self.name}.csv"
        jpath.write_text(self.to_json() + "\n")
        cpath.write_text(self.measurements_csv())
        return jpath, cpath


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return _plain(obj)


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    header = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        out = []
        for key in header:
            v = row.get(key, "")
            if isinstance(v, (float, np.floating)):
                v = format_float(v)
            out.append(v)
        writer.writerow(out)
    return buf.getvalue()


def read_csv(path) -> list[dict[str, float]]:
    """Read a measurement CSV back, converting numeric cells to float."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
            rows.append(parsed)
    return rows
