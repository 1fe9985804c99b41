"""Link quality and data transfer time estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional

if TYPE_CHECKING:
    from .routing import RouteEntry

PACKET_BITS = 512 * 8
HEADER_BITS = 32 * 8


@dataclass
class LinkStats:
    """Traffic view used by the link-quality estimate.

    ``b_self`` is each node's current traffic with its neighbours in bits/s.
    """

    b_channel: float = 2e6
    b_self: dict[int, float] = field(default_factory=dict)
    neighbors: dict[int, set[int]] = field(default_factory=dict)
    sent: int = 0
    delivered: int = 0
    dropped: int = 0

    def add_traffic(self, node: int, rate: float) -> None:
        self.b_self[node] = self.b_self.get(node, 0.0) + rate

    def remove_traffic(self, node: int, rate: float) -> None:
        left = self.b_self.get(node, 0.0) - rate
        # float residue from add/remove pairs
        self.b_self[node] = left if left > 1e-6 else 0.0


def link_quality(
    m: int,
    k: int,
    stats: LinkStats,
    neighbors: Optional[Iterable[int]] = None,
) -> float:
    """Available bandwidth between ``m`` and ``k``: channel minus the self-traffic
    of every neighbour of ``m``, floored at zero."""
    nbrs = stats.neighbors.get(m, ()) if neighbors is None else neighbors
    load = sum(stats.b_self.get(j, 0.0) for j in nbrs)
    return max(stats.b_channel - load, 0.0)


def packets_for(data_size_bits: float, pkt_size_bits: int = PACKET_BITS, header_bits: int = HEADER_BITS) -> int:
    payload = pkt_size_bits - header_bits
    if payload <= 0:
        raise ValueError("packet size must exceed header size")
    if data_size_bits <= 0:
        return 0
    if float(data_size_bits).is_integer() and float(payload).is_integer():
        return -(-int(data_size_bits) // int(payload))
    return math.ceil(data_size_bits / payload)


def hop_transfer_time(packets: float, avg_dropped_lost: float, pkt_size_bits: float, lq: float) -> float:
    if packets == 0:
        return 0.0
    if lq <= 0:
        return math.inf
    return (packets * pkt_size_bits) / lq + (avg_dropped_lost * pkt_size_bits) / lq


def estimate_dtt(
    data_size_bits: float,
    entry: "RouteEntry",
    pkt_size_bits: int = PACKET_BITS,
    header_bits: int = HEADER_BITS,
) -> float:
    """Estimated transfer time over ``entry``; multi-hop routes add each hop
    (store and forward). ``inf`` marks an unusable route."""
    n = packets_for(data_size_bits, pkt_size_bits, header_bits)
    if n == 0:
        return 0.0
    total = 0.0
    for lq, avg_dl in entry.hop_metrics():
        total += hop_transfer_time(n, avg_dl, pkt_size_bits, lq)
    return total


def ewma(previous: float, sample: float, weight: float = 0.2) -> float:
    return (1.0 - weight) * previous + weight * sample

