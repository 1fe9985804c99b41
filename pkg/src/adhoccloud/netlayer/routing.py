"""Per-power-level routing tables and route selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .estimation import HEADER_BITS, PACKET_BITS, estimate_dtt


class NoRoute(LookupError):
    """Destination absent from every routing table."""


@dataclass
class RouteEntry:
    next_node: int
    dest_node: int
    power_level: int
    avg_dropped_lost: float = 0.0
    link_quality: float = 0.0
    predicted_lifetime: float = 0.0
    lifetime_probability: float = 0.0
    # full hop list after the origin, ending at dest; empty means one hop
    path: tuple[int, ...] = ()
    # (link quality, avg dropped+lost) per hop, used for multi-hop estimates
    hop_stats: tuple[tuple[float, float], ...] = ()
    # power level used on each hop
    hop_levels: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.path:
            self.path = (self.dest_node,) if self.next_node == self.dest_node else (self.next_node, self.dest_node)
        if self.link_quality < 0 or self.avg_dropped_lost < 0:
            raise ValueError("link quality and drop average must be non-negative")
        if not 0.0 <= self.lifetime_probability <= 1.0:
            raise ValueError("lifetime probability must lie in [0, 1]")

    @property
    def hops(self) -> int:
        return len(self.path)

    def hop_metrics(self) -> list[tuple[float, float]]:
        if self.hop_stats:
            return list(self.hop_stats)
        return [(self.link_quality, self.avg_dropped_lost)]

    def levels(self) -> tuple[int, ...]:
        return self.hop_levels or (self.power_level,) * self.hops


@dataclass
class RoutingTableSet:
    """RTP_1 .. RTP_k: level -> destination -> routes."""

    levels: int
    tables: dict[int, dict[int, list[RouteEntry]]] = field(default_factory=dict)

    def __post_init__(self):
        for lvl in range(1, self.levels + 1):
            self.tables.setdefault(lvl, {})

    def table(self, level: int) -> dict[int, list[RouteEntry]]:
        return self.tables[level]

    def add(self, entry: RouteEntry) -> None:
        if not 1 <= entry.power_level <= self.levels:
            raise ValueError(f"invalid power level {entry.power_level}")
        routes = self.tables[entry.power_level].setdefault(entry.dest_node, [])
        for i, r in enumerate(routes):
            if r.path == entry.path:
                routes[i] = entry
                return
        routes.append(entry)

    def remove(self, dest: int, level: Optional[int] = None) -> None:
        for lvl in ([level] if level else range(1, self.levels + 1)):
            self.tables[lvl].pop(dest, None)

    def routes(self, dest: int, level: int) -> list[RouteEntry]:
        return self.tables[level].get(dest, [])

    def levels_with(self, dest: int) -> list[int]:
        return [lvl for lvl in range(1, self.levels + 1) if self.tables[lvl].get(dest)]

    def lowest_level(self, dest: int) -> Optional[int]:
        lv = self.levels_with(dest)
        return lv[0] if lv else None

    def destinations(self) -> set[int]:
        out: set[int] = set()
        for t in self.tables.values():
            out.update(d for d, r in t.items() if r)
        return out

    def __iter__(self) -> Iterator[RouteEntry]:
        for lvl in range(1, self.levels + 1):
            for dest in sorted(self.tables[lvl]):
                yield from self.tables[lvl][dest]

    def __contains__(self, dest: int) -> bool:
        return any(self.tables[lvl].get(dest) for lvl in self.tables)


@dataclass(frozen=True)
class RouteChoice:
    entry: RouteEntry
    e_dtt: float
    fallback: bool = False


def _preference(entry: RouteEntry, e_dtt: float) -> tuple:
    # most probable lifetime first, then faster, then deterministic ids
    return (-entry.lifetime_probability, e_dtt, entry.hops, entry.next_node, entry.path)


def select_route(
    dest: int,
    data_size_bits: float,
    tables: RoutingTableSet,
    pkt_size_bits: int = PACKET_BITS,
    header_bits: int = HEADER_BITS,
) -> RouteChoice:
    """Pick a route whose predicted lifetime covers its estimated transfer time.

    Tables are scanned from the lowest power level; the first level holding
    any qualifying route wins, and among those the route with the highest
    lifetime probability is taken. With no qualifying route anywhere the
    longest-lived route in the lowest level containing ``dest`` is returned
    and flagged as a fallback.
    """
    present = tables.levels_with(dest)
    if not present:
        raise NoRoute(dest)
    for level in present:
        best: Optional[tuple[tuple, RouteEntry, float]] = None
        for entry in tables.routes(dest, level):
            e_dtt = estimate_dtt(data_size_bits, entry, pkt_size_bits, header_bits)
            if math.isinf(e_dtt) or entry.predicted_lifetime < e_dtt:
                continue
            key = _preference(entry, e_dtt)
            if best is None or key < best[0]:
                best = (key, entry, e_dtt)
        if best is not None:
            return RouteChoice(best[1], best[2], fallback=False)

    level = present[0]
    scored = []
    for entry in tables.routes(dest, level):
        e_dtt = estimate_dtt(data_size_bits, entry, pkt_size_bits, header_bits)
        scored.append(((-entry.predicted_lifetime,) + _preference(entry, e_dtt), entry, e_dtt))
    scored.sort(key=lambda t: t[0])
    _, entry, e_dtt = scored[0]
    return RouteChoice(entry, e_dtt, fallback=True)
