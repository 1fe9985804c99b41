"""Parameter sweeps over task counts, seeds and schemes."""

from __future__ import annotations

import itertools
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .config import ScenarioConfig
from .metrics import MetricsRecord
from .simulation import simulate


def _sort_key(r: MetricsRecord):
    return (r.scenario, r.scheme, r.seed, r.tasks, r.power_mode)


def _one(cfg: ScenarioConfig) -> MetricsRecord:
    try:
        return simulate(cfg).metrics
    except Exception as exc:  # a failed run becomes a row, the sweep goes on
        return MetricsRecord(
            scenario=cfg.name, scheme=cfg.scheme, power_mode=cfg.power_mode,
            seed=cfg.seed, tasks=cfg.workload.tasks,
            error=f"{type(exc).__name__}: {exc}".replace("\n", " "),
        )


def sweep_configs(
    base: ScenarioConfig,
    task_counts: Sequence[int],
    seeds: Sequence[int],
    schemes: Sequence[str],
    power_modes: Sequence[str] = ("multi",),
) -> list[ScenarioConfig]:
    if not task_counts or not seeds or not schemes or not power_modes:
        raise ValueError("task counts, seeds, schemes and power modes must be non-empty")
    out = []
    for tasks, seed, scheme, mode in itertools.product(task_counts, seeds, schemes, power_modes):
        cfg = base.replace(seed=int(seed), scheme=scheme, power_mode=mode)
        cfg.workload.tasks = int(tasks)
        out.append(cfg.validate())
    return out


def sweep(
    base: ScenarioConfig,
    task_counts: Sequence[int],
    seeds: Sequence[int],
    schemes: Sequence[str],
    power_modes: Sequence[str] = ("multi",),
    jobs: int = 1,
) -> list[MetricsRecord]:
    """Run the cartesian product; rows come back sorted, never in completion order."""
    cfgs = sweep_configs(base, task_counts, seeds, schemes, power_modes)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_one, cfgs))
    else:
        rows = [_one(c) for c in cfgs]
    return sorted(rows, key=_sort_key)


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    scheme: str
    power_mode: str
    tasks: int
    n: int
    mean: float
    std: float


def summarize(rows: Iterable[MetricsRecord], metric: str = "atct_s") -> list[SummaryRow]:
    """Mean and sample standard deviation per (scenario, scheme, mode, tasks)."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        if r.error:
            continue
        groups.setdefault((r.scenario, r.scheme, r.power_mode, r.tasks), []).append(float(getattr(r, metric)))
    out = []
    for key in sorted(groups):
        vals = groups[key]
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(SummaryRow(*key, n=len(vals), mean=statistics.fmean(vals), std=std))
    return out


def relative_improvement(baseline: float, proposed: float) -> float:
    if baseline == 0:
        return 0.0 if proposed == 0 else -math.inf
    return (baseline - proposed) / baseline


def paired_improvements(
    rows: Iterable[MetricsRecord],
    baseline: str,
    metric: str = "atct_s",
    proposed: str = "proposed",
    baseline_mode: Optional[str] = None,
    proposed_mode: str = "multi",
) -> dict[int, list[tuple[int, float]]]:
    """Per task count, the (seed, improvement) pairs of proposed over ``baseline``.

    Only seeds where both runs finished without error are paired.
    """
    baseline_mode = baseline_mode or "multi"
    index: dict[tuple, MetricsRecord] = {}
    for r in rows:
        if not r.error:
            index[(r.scenario, r.scheme, r.power_mode, r.tasks, r.seed)] = r
    out: dict[int, list[tuple[int, float]]] = {}
    for (scen, scheme, mode, tasks, seed), r in sorted(index.items()):
        if scheme != proposed or mode != proposed_mode:
            continue
        b = index.get((scen, baseline, baseline_mode, tasks, seed))
        if b is None:
            continue
        imp = relative_improvement(float(getattr(b, metric)), float(getattr(r, metric)))
        out.setdefault(tasks, []).append((seed, imp))
    return out


def mean_improvement(
    rows: Sequence[MetricsRecord], baseline: str, metric: str = "atct_s", **kw
) -> dict[int, float]:
    """Improvement of the paired means, (mean_b - mean_p) / mean_b, per task count."""
    pairs = paired_improvements(rows, baseline, metric, **kw)
    proposed = kw.get("proposed", "proposed")
    p_mode = kw.get("proposed_mode", "multi")
    b_mode = kw.get("baseline_mode") or "multi"
    by = {(r.scheme, r.power_mode, r.tasks, r.seed): float(getattr(r, metric)) for r in rows if not r.error}
    out = {}
    for tasks, seeds in pairs.items():
        p = math.fsum(by[(proposed, p_mode, tasks, s)] for s, _ in seeds)
        b = math.fsum(by[(baseline, b_mode, tasks, s)] for s, _ in seeds)
        out[tasks] = relative_improvement(b, p)
    return out


def summary_table(rows: Sequence[MetricsRecord], metric: str = "atct_s") -> str:
    lines = ["scenario\tscheme\tpower_mode\ttasks\tn\tmean\tstd"]
    for s in summarize(rows, metric):
        lines.append(f"{s.scenario}\t{s.scheme}\t{s.power_mode}\t{s.tasks}\t{s.n}\t{s.mean!r}\t{s.std!r}")
    return "\n".join(lines) + "\n"


def improvement_table(rows: Sequence[MetricsRecord], metric: str = "atct_s") -> str:
    """Per paired seed: (baseline - proposed) / baseline for every baseline present."""
    schemes = sorted({r.scheme for r in rows if r.scheme != "proposed"})
    lines = ["baseline\ttasks\tseed\timprovement"]
    for b in schemes:
        for tasks, pairs in sorted(paired_improvements(rows, b, metric).items()):
            for seed, imp in pairs:
                lines.append(f"{b}\t{tasks}\t{seed}\t{imp!r}")
    return "\n".join(lines) + "\n"
