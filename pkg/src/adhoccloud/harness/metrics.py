"""Run metrics and their CSV form."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def atct(completion_times: Iterable[float]) -> float:
    """Accumulated task completion time: the plain sum of measured times."""
    return math.fsum(completion_times)


@dataclass
class MetricsRecord:
    scenario: str
    scheme: str
    power_mode: str
    seed: int
    tasks: int
    tasks_submitted: int = 0
    tasks_completed: int = 0
    tasks_failed: int = 0
    atct_s: float = 0.0
    tx_energy_j: float = 0.0
    control_packets: int = 0
    data_packets: int = 0
    migrations: int = 0
    reallocations: int = 0
    mean_completion_s: float = 0.0
    p50_completion_s: float = 0.0
    p95_completion_s: float = 0.0
    violations: int = 0
    error: str = ""

    @classmethod
    def fields(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def row(self) -> list[str]:
        return [_fmt(getattr(self, f)) for f in self.fields()]

    def with_completions(self, times: Sequence[float]) -> "MetricsRecord":
        self.atct_s = atct(times)
        if len(times):
            arr = np.asarray(times, dtype=float)
            self.mean_completion_s = self.atct_s / len(times)
            self.p50_completion_s = float(np.percentile(arr, 50))
            self.p95_completion_s = float(np.percentile(arr, 95))
        return self


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


_INT_FIELDS = {"seed", "tasks", "tasks_submitted", "tasks_completed", "tasks_failed", "control_packets",
               "data_packets", "migrations", "reallocations", "violations"}
_STR_FIELDS = {"scenario", "scheme", "power_mode", "error"}


def parse_row(row: dict[str, str]) -> MetricsRecord:
    kw = {}
    for name in MetricsRecord.fields():
        raw = row.get(name, "")
        if name in _STR_FIELDS:
            kw[name] = raw
        elif name in _INT_FIELDS:
            kw[name] = int(raw) if raw != "" else 0
        else:
            kw[name] = float(raw) if raw != "" else 0.0
    return MetricsRecord(**kw)


def to_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MetricsRecord.fields())
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(text: str) -> list[MetricsRecord]:
    return [parse_row(r) for r in csv.DictReader(io.StringIO(text))]
