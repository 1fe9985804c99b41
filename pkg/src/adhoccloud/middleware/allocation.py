"""Cost-driven task allocation over the resource pool and routing tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Collection, Iterable, Mapping, Optional, Union

from ..netlayer.estimation import HEADER_BITS, PACKET_BITS
from ..netlayer.routing import RouteEntry, RoutingTableSet
from .costs import CompletionEstimate, NodeLoad, energy_consumption, estimate_completion_time
from .model import TaskSpec
from .pool import ResourcePool, ResourcePoolEntry


@dataclass(frozen=True)
class Candidate:
    node: int
    route: RouteEntry
    estimate: CompletionEstimate
    e_ec: float

    @property
    def e_ct(self) -> float:
        return self.estimate.e_ct

    @property
    def key(self) -> tuple:
        return allocation_key(self.e_ct, self.route, self.node)


def allocation_key(e_ct: float, route: RouteEntry, node: int) -> tuple:
    """Total order used to pick among qualifying (node, route) pairs."""
    return (e_ct, -route.lifetime_probability, route.power_level, node, route.hops, route.path)


LoadSource = Union[Mapping[int, NodeLoad], Callable[[int], NodeLoad]]


def _load(source: Optional[LoadSource], node: int) -> NodeLoad:
    if source is None:
        return NodeLoad()
    if callable(source):
        return source(node)
    return source.get(node, NodeLoad())


def candidates(
    task: TaskSpec,
    pool: Union[ResourcePool, Iterable[ResourcePoolEntry]],
    tables: RoutingTableSet,
    loads: Optional[LoadSource] = None,
    phi: float = 1e-3,
    alpha: float = 0.0,
    beta: float = 0.0,
    pkt_bits: int = PACKET_BITS,
    header_bits: int = HEADER_BITS,
    exclude: Collection[int] = (),
    eligible: Optional[Collection[int]] = None,
    instructions: Optional[float] = None,
) -> list[Candidate]:
    """Every (available node, route) pair whose predicted route lifetime
    covers its estimated transfer time, scanned from the lowest level up."""
    entries = pool.entries if isinstance(pool, ResourcePool) else {e.node_id: e for e in pool}
    out = []
    packets = task.packets(pkt_bits, header_bits)
    for level in range(1, tables.levels + 1):
        table = tables.table(level)
        for node in sorted(table):
            entry = entries.get(node)
            if entry is None or not entry.available or node in exclude:
                continue
            if eligible is not None and node not in eligible:
                continue
            load = _load(loads, node)
            for route in table[node]:
                est = estimate_completion_time(
                    task, entry.cpi, entry.cct, phi, load, route, pkt_bits, header_bits, instructions
                )
                if math.isinf(est.e_dtt) or route.predicted_lifetime < est.e_dtt:
                    continue
                out.append(Candidate(node, route, est, energy_consumption(alpha, est.e_pt, beta, packets)))
    return out


def allocate(
    task: TaskSpec,
    pool: Union[ResourcePool, Iterable[ResourcePoolEntry]],
    tables: RoutingTableSet,
    loads: Optional[LoadSource] = None,
    **kw,
) -> Optional[Candidate]:
    """Pick the qualifying pair with the lowest estimated completion time.

    Ties fall to the more probable route lifetime, then lower power level,
    node id, hop count and path. Returns None when nothing qualifies so the
    caller can defer the task.
    """
    best: Optional[Candidate] = None
    for c in candidates(task, pool, tables, loads, **kw):
        if best is None or c.key < best.key:
            best = c
    return best
