"""Distance-based neighbour discovery.

The origin broadcasts a request at maximum power. Each receiver turns the
measured RSSI into a distance, picks the lowest power level that covers
it and answers at that level. The origin files the replier in the table
for that level only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..radio import Delivery, RadioConfig, Unreachable, deliverable, estimate_distance, min_power_level, rssi
from .routing import RouteEntry, RoutingTableSet

# bytes on the wire: type, source, tx power, level, broadcast id
DISCOVERY_BYTES = 12


class PacketKind(str, enum.Enum):
    REQUEST = "request"
    REPLY = "reply"


@dataclass(frozen=True)
class DiscoveryPacket:
    kind: PacketKind
    source: int
    tx_power_dbm: float
    broadcast_id: int
    selected_level: Optional[int] = None
    dest: Optional[int] = None  # reply target

    @property
    def size_bits(self) -> int:
        return DISCOVERY_BYTES * 8


def make_request(origin: int, radio: RadioConfig, broadcast_id: int) -> DiscoveryPacket:
    return DiscoveryPacket(PacketKind.REQUEST, origin, radio.tx_power(radio.max_level), broadcast_id)


def handle_discovery_request(
    receiver: int, pkt: DiscoveryPacket, measured_rssi_dbm: float, radio: RadioConfig
) -> Optional[DiscoveryPacket]:
    if pkt.kind is not PacketKind.REQUEST:
        raise ValueError("not a discovery request")
    distance = estimate_distance(pkt.tx_power_dbm, measured_rssi_dbm, radio.path_loss_exponent)
    try:
        level = min_power_level(distance, radio)
    except Unreachable:
        return None
    return DiscoveryPacket(
        PacketKind.REPLY,
        receiver,
        radio.tx_power(level),
        pkt.broadcast_id,
        selected_level=level,
        dest=pkt.source,
    )


def handle_discovery_reply(tables: RoutingTableSet, pkt: DiscoveryPacket) -> RouteEntry:
    """Insert or move the replier's direct entry to RTP_{selected_level}."""
    if pkt.kind is not PacketKind.REPLY or pkt.selected_level is None:
        raise ValueError("not a discovery reply")
    node = pkt.source
    for lvl in range(1, tables.levels + 1):
        if lvl == pkt.selected_level:
            continue
        routes = tables.table(lvl).get(node)
        if routes:
            kept = [r for r in routes if r.path != (node,)]
            if kept:
                tables.table(lvl)[node] = kept
            else:
                del tables.table(lvl)[node]
    entry = RouteEntry(next_node=node, dest_node=node, power_level=pkt.selected_level)
    tables.add(entry)
    return entry


@dataclass
class DiscoveryRecord:
    """One transmitted discovery packet and what happened to it."""

    packet: DiscoveryPacket
    sender: int
    receiver: Optional[int]  # None for the broadcast request
    level: int
    outcome: Optional[Delivery] = None


def start_discovery(
    origin: int,
    positions: np.ndarray,
    radio: RadioConfig,
    tables: RoutingTableSet,
    rng: np.random.Generator,
    broadcast_id: int = 0,
    alive: Optional[Callable[[int], bool]] = None,
) -> list[DiscoveryRecord]:
    """Run one request/reply round from ``origin`` and update its tables.

    Propagation delays are a few milliseconds, so the round completes
    within the calling event. Returns every packet sent for accounting.
    """
    req = make_request(origin, radio, broadcast_id)
    records = [DiscoveryRecord(req, origin, None, radio.max_level)]
    n = len(positions)
    dists = np.hypot(*(positions - positions[origin]).T)
    for j in range(n):
        if j == origin or (alive is not None and not alive(j)):
            continue
        d = float(dists[j])
        if deliverable(d, radio.max_level, radio, rng) is not Delivery.DELIVERED:
            continue
        reply = handle_discovery_request(j, req, rssi(req.tx_power_dbm, d, radio.path_loss_exponent), radio)
        if reply is None:
            continue
        outcome = deliverable(d, reply.selected_level, radio, rng)
        records.append(DiscoveryRecord(reply, j, origin, reply.selected_level, outcome))
        if outcome is Delivery.DELIVERED:
            handle_discovery_reply(tables, reply)
    return records
