"""Built-in scenario presets.

S1  four walking groups in a confined region
S2  the same groups moving fast over a wider region (frequent link breaks)
S3  static uniform grid where neighbours are reachable only at max power
S4  static clusters of different sizes, tight enough for low power inside
"""

from __future__ import annotations

from ..mobility import MobilityGroup
from .config import ScenarioConfig, WorkloadConfig

PRESETS = ("S1", "S2", "S3", "S4")


def _groups(sizes, speed, jitter_radius, jitter_step, region=None, starts=None):
    out = []
    first = 0
    for g, size in enumerate(sizes):
        members = list(range(first, first + size))
        first += size
        out.append(
            MobilityGroup(
                members=members,
                speed=speed,
                jitter_radius=jitter_radius,
                jitter_step=jitter_step,
                start=None if starts is None else starts[g],
                region=region,
            )
        )
    return out


def scenario_1(**kw) -> ScenarioConfig:
    cfg = ScenarioConfig(
        name="S1",
        sim_time_s=900.0,
        smn=0,
        scns=[5, 10, 15],
        groups=_groups([5, 5, 5, 5], speed=0.5, jitter_radius=40.0, jitter_step=0.5, region=(500.0, 500.0, 700.0, 700.0)),
        workload=WorkloadConfig(tasks=20),
    )
    return cfg.replace(**kw) if kw else cfg.validate()


def scenario_2(**kw) -> ScenarioConfig:
    cfg = ScenarioConfig(
        name="S2",
        sim_time_s=900.0,
        smn=0,
        scns=[5, 10, 15],
        groups=_groups([5, 5, 5, 5], speed=4.0, jitter_radius=40.0, jitter_step=1.0, region=(300.0, 300.0, 900.0, 900.0)),
        workload=WorkloadConfig(tasks=20),
    )
    return cfg.replace(**kw) if kw else cfg.validate()


def scenario_3(**kw) -> ScenarioConfig:
    spacing = 150.0
    cols, rows = 5, 4
    offsets = {}
    for i in range(cols * rows):
        r, c = divmod(i, cols)
        offsets[i] = ((c - (cols - 1) / 2) * spacing, (r - (rows - 1) / 2) * spacing)
    cfg = ScenarioConfig(
        name="S3",
        smn=7,
        scns=[0, 4, 17],
        groups=[MobilityGroup(members=list(range(20)), speed=0.0, jitter_radius=0.0, jitter_step=0.0, start=(600.0, 600.0))],
        fixed_offsets=offsets,
        workload=WorkloadConfig(tasks=20),
    )
    return cfg.replace(**kw) if kw else cfg.validate()


def scenario_4(**kw) -> ScenarioConfig:
    starts = [(450.0, 600.0), (600.0, 600.0), (750.0, 600.0), (600.0, 750.0)]
    cfg = ScenarioConfig(
        name="S4",
        smn=0,
        scns=[1, 8, 9],
        groups=_groups([8, 6, 4, 2], speed=0.0, jitter_radius=25.0, jitter_step=0.0, starts=starts),
        workload=WorkloadConfig(tasks=20),
    )
    return cfg.replace(**kw) if kw else cfg.validate()


def preset(name: str, **kw) -> ScenarioConfig:
    table = {"S1": scenario_1, "S2": scenario_2, "S3": scenario_3, "S4": scenario_4}
    try:
        fn = table[name.upper()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESETS}") from None
    return fn(**kw)
