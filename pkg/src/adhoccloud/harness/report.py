"""Plot-ready series from sweep output.

File format of ``series_<metric>.tsv``: a header line, then one line per
(series, x) with tab-separated columns

    series  x  mean  std  n

where ``series`` is ``<scheme>`` (or ``<scheme>/<power_mode>`` for max-only
runs), ``x`` is the task count, ``mean`` and ``std`` are over seeds. Rows are
sorted by series then x.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Sequence

from .metrics import MetricsRecord, read_csv
from .sweep import summarize

METRICS = {
    "atct": "atct_s",
    "tx_energy": "tx_energy_j",
    "control_packets": "control_packets",
    "data_packets": "data_packets",
    "tasks_completed": "tasks_completed",
    "migrations": "migrations",
}


class UnknownMetric(ValueError):
    pass


def series_rows(rows: Sequence[MetricsRecord], metric: str) -> list[tuple[str, int, float, float, int]]:
    if metric not in METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; valid metrics: {', '.join(sorted(METRICS))}")
    out = []
    for s in summarize(rows, METRICS[metric]):
        name = s.scheme if s.power_mode == "multi" else f"{s.scheme}/{s.power_mode}"
        if len({r.scenario for r in rows}) > 1:
            name = f"{s.scenario}:{name}"
        out.append((name, s.tasks, s.mean, s.std, s.n))
    return sorted(out, key=lambda r: (r[0], r[1]))


def render_series(rows: Sequence[MetricsRecord], metric: str) -> str:
    body = series_rows(rows, metric)
    if not body:
        warnings.warn("no rows to report; writing an empty series", stacklevel=2)
    lines = ["series\tx\tmean\tstd\tn"]
    lines += [f"{name}\t{x}\t{mean!r}\t{std!r}\t{n}" for name, x, mean, std, n in body]
    return "\n".join(lines) + "\n"


def emit_plot_data(in_dir: str | Path, metric: str) -> Path:
    """Read ``metrics.csv`` in ``in_dir`` and write ``series_<metric>.tsv`` next to it."""
    in_dir = Path(in_dir)
    src = in_dir / "metrics.csv"
    if not src.exists():
        raise FileNotFoundError(f"{src} does not exist")
    text = render_series(read_csv(src.read_text()), metric)
    dst = in_dir / f"series_{metric}.tsv"
    dst.write_text(text)
    return dst
