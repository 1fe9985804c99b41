"""Scenario configuration: JSON <-> dataclasses with validation."""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..middleware.migration import MigrationPolicy
from ..middleware.pool import NiumThresholds, ProtocolTimers
from ..mobility import MobilityGroup
from ..netlayer.lifetime import Boundaries
from ..radio import RadioConfig

SCHEMES = ("proposed", "hta", "minhop")
POWER_MODES = ("multi", "max-only")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class Tier:
    cpi: float
    cct: float


DEFAULT_TIERS = {
    "fast": Tier(1.0, 2.0e-9),
    "mid": Tier(1.5, 2.5e-9),
    "slow": Tier(2.0, 3.3e-9),
}


@dataclass
class NodeOverride:
    node_id: int
    tier: Optional[str] = None
    cpi: Optional[float] = None
    cct: Optional[float] = None
    phi: Optional[float] = None
    battery_j: Optional[float] = None
    memory_total: Optional[float] = None
    p_static: Optional[float] = None
    beta: Optional[float] = None


@dataclass
class HardwareConfig:
    tiers: dict[str, Tier] = field(default_factory=lambda: dict(DEFAULT_TIERS))
    phi: float = 1e-3
    p_static: float = 0.1
    active_gates: float = 1.0
    capacitance: float = 1e-9
    voltage: float = 1.0
    beta: float = 1e-5
    memory_total: float = 512e6
    battery_mean_j: float = 5000.0
    battery_spread_j: float = 500.0
    nodes: list[NodeOverride] = field(default_factory=list)


@dataclass
class WorkloadConfig:
    tasks: int = 20
    instructions: tuple[float, float] = (1e8, 1e9)
    input_bits: tuple[float, float] = (0.5e6, 4e6)
    output_fraction: float = 0.1
    code_bits: float = 100e3
    # first arrival and the span over which arrivals are spread uniformly
    start_s: float = 60.0
    window_s: float = 60.0


@dataclass
class NetworkTiming:
    hello_period_s: float = 2.0
    discovery_period_s: float = 10.0
    mobility_dt_s: float = 1.0
    route_repair_s: float = 1.0
    min_share: float = 0.25
    # a broken discovered link triggers a fresh round at most this often per node
    reactive_discovery_s: float = 2.0


@dataclass
class ControlTiming:
    allocation_tick_s: float = 1.0
    submit_retry_s: float = 2.0
    notice_retry_s: float = 5.0
    # detected failures before a task is dropped; None retries forever
    max_failures: Optional[int] = None


@dataclass
class ScenarioConfig:
    name: str = "custom"
    area_m: float = 1200.0
    sim_time_s: float = 3600.0
    n_nodes: int = 20
    smn: int = 0
    scns: list[int] = field(default_factory=lambda: [1])
    # providers; empty means every node that is neither master nor consumer
    spns: list[int] = field(default_factory=list)
    groups: list[MobilityGroup] = field(default_factory=list)
    # pinned member offsets from the group centroid (node id -> (dx, dy))
    fixed_offsets: dict[int, tuple[float, float]] = field(default_factory=dict)
    radio: RadioConfig = field(default_factory=RadioConfig)
    timers: ProtocolTimers = field(default_factory=ProtocolTimers)
    boundaries: Boundaries = field(default_factory=Boundaries)
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    network: NetworkTiming = field(default_factory=NetworkTiming)
    control: ControlTiming = field(default_factory=ControlTiming)
    migration: MigrationPolicy = field(default_factory=MigrationPolicy)
    scheme: str = "proposed"
    seed: int = 1
    power_mode: str = "multi"

    @property
    def providers(self) -> list[int]:
        if self.spns:
            return sorted(self.spns)
        busy = {self.smn, *self.scns}
        return [i for i in range(self.n_nodes) if i not in busy]

    def validate(self) -> "ScenarioConfig":
        n = self.n_nodes
        if n < 2:
            raise ConfigError("need at least two nodes")
        if self.area_m <= 0 or self.sim_time_s <= 0:
            raise ConfigError("area_m and sim_time_s must be positive")
        ids = range(n)
        if self.smn not in ids:
            raise ConfigError(f"SMN id {self.smn} does not exist")
        if not self.scns:
            raise ConfigError("at least one SCN is required")
        for s in self.scns + self.spns:
            if s not in ids:
                raise ConfigError(f"node id {s} does not exist")
        if self.smn in self.scns:
            raise ConfigError("the SMN cannot also be an SCN")
        if len(set(self.scns)) != len(self.scns):
            raise ConfigError("duplicate SCN ids")
        if set(self.spns) & ({self.smn} | set(self.scns)):
            raise ConfigError("SPN list overlaps the SMN or SCNs")
        if not self.providers:
            raise ConfigError("at least one SPN is required")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.power_mode not in POWER_MODES:
            raise ConfigError(f"power_mode must be one of {POWER_MODES}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        members = sorted(m for g in self.groups for m in g.members)
        if self.groups and members != list(ids):
            raise ConfigError("mobility groups must cover every node exactly once")
        for node in self.fixed_offsets:
            if node not in ids:
                raise ConfigError(f"fixed offset for unknown node {node}")
        w = self.workload
        if w.tasks < 0:
            raise ConfigError("task count must be non-negative")
        for lo, hi in (w.instructions, w.input_bits):
            if lo < 0 or hi < lo:
                raise ConfigError("workload ranges need 0 <= low <= high")
        if self.control.max_failures is not None and self.control.max_failures < 0:
            raise ConfigError("max_failures must be non-negative or null")
        for o in self.hardware.nodes:
            if o.node_id not in ids:
                raise ConfigError(f"override for unknown node {o.node_id}")
            if o.tier is not None and o.tier not in self.hardware.tiers:
                raise ConfigError(f"unknown tier {o.tier!r}")
        for name, t in self.hardware.tiers.items():
            if t.cpi <= 0 or t.cct <= 0:
                raise ConfigError(f"tier {name!r} needs positive cpi and cct")
        return self

    # ------------------------------------------------------------ JSON
    def to_dict(self) -> dict[str, Any]:
        return _to_plain(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        try:
            cfg = _build(cls, data)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        for k, v in changes.items():
            if not hasattr(cfg, k):
                raise ConfigError(f"unknown field {k!r}")
            setattr(cfg, k, v)
        return cfg.validate()


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


# nested dataclass fields and how to build them
_NESTED = {
    "radio": RadioConfig,
    "timers": ProtocolTimers,
    "boundaries": Boundaries,
    "hardware": HardwareConfig,
    "workload": WorkloadConfig,
    "network": NetworkTiming,
    "control": ControlTiming,
    "migration": MigrationPolicy,
    "thresholds": NiumThresholds,
}


def _build(cls, data: dict[str, Any]):
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} field(s): {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key, val in data.items():
        if key in _NESTED and isinstance(val, dict):
            kw[key] = _build(_NESTED[key], val)
        elif cls is ScenarioConfig and key == "groups":
            kw[key] = [_group(g) for g in val]
        elif cls is ScenarioConfig and key == "fixed_offsets":
            kw[key] = {int(k): (float(v[0]), float(v[1])) for k, v in val.items()}
        elif cls is HardwareConfig and key == "tiers":
            kw[key] = {name: _build(Tier, t) for name, t in val.items()}
        elif cls is HardwareConfig and key == "nodes":
            kw[key] = [_build(NodeOverride, o) for o in val]
        elif cls is WorkloadConfig and key in ("instructions", "input_bits"):
            kw[key] = (float(val[0]), float(val[1]))
        else:
            kw[key] = val
    return cls(**kw)


def _group(d: dict[str, Any]) -> MobilityGroup:
    g = _build(MobilityGroup, d)
    if g.start is not None:
        g.start = (float(g.start[0]), float(g.start[1]))
    if g.region is not None:
        g.region = tuple(float(v) for v in g.region)
    g.members = [int(m) for m in g.members]
    return g
