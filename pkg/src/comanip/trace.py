"""Run recording: decimated per-tick trace rows (CSV) and the exact
full-run summary (JSON).

The CSV is plot-ready: one header row naming every column, floats at 17
significant digits, fixed column schema per scenario.  Quantities that must
hold on *every* tick (wrench agreement, physical-consistency margins, QP
residuals) are accumulated online into the summary rather than decimated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SimTrace:
    columns: list[str]
    rows: list = field(default_factory=list)

    def append(self, values: np.ndarray):
        if values.size != len(self.columns):
            raise ValueError(f"trace row width {values.size} != schema {len(self.columns)}")
        self.rows.append(np.asarray(values, dtype=float).copy())

    def as_array(self) -> np.ndarray:
        return np.array(self.rows) if self.rows else np.zeros((0, len(self.columns)))

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(",".join(self.columns) + "\n")
            for row in self.rows:
                f.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SimTrace":
        with open(path) as f:
            header = f.readline().strip()
            if not header:
                raise ValueError(f"{path}: no data")
            columns = header.split(",")
            rows = []
            for line in f:
                line = line.strip()
                if line:
                    rows.append(np.array([float(v) for v in line.split(",")]))
        tr = cls(columns)
        for r in rows:
            tr.append(r)
        return tr


class RunningStats:
    """Online accumulators for the run summary."""

    def __init__(self):
        self.max = {}
        self.min = {}
        self.sq_sum = {}
        self.sq_n = {}
        self.counts = {}

    def track_max(self, key, value):
        v = float(value)
        if key not in self.max or v > self.max[key]:
            self.max[key] = v

    def track_min(self, key, value):
        v = float(value)
        if key not in self.min or v < self.min[key]:
            self.min[key] = v

    def track_rms(self, key, vec):
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if key not in self.sq_sum:
            self.sq_sum[key] = np.zeros_like(vec)
            self.sq_n[key] = 0
        self.sq_sum[key] += vec * vec
        self.sq_n[key] += 1

    def count(self, key, inc=1):
        self.counts[key] = self.counts.get(key, 0) + inc

    def rms(self, key):
        if self.sq_n.get(key, 0) == 0:
            return None
        return np.sqrt(self.sq_sum[key] / self.sq_n[key])

    def summary(self) -> dict:
        out = {}
        for k, v in sorted(self.max.items()):
            out[f"max_{k}"] = v
        for k, v in sorted(self.min.items()):
            out[f"min_{k}"] = v
        for k in sorted(self.sq_sum):
            out[f"rms_{k}"] = [float(x) for x in self.rms(k)]
        out.update({k: v for k, v in sorted(self.counts.items())})
        return out


def write_summary(path, summary: dict):
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")
