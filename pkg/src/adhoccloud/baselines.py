"""Comparison allocators: heterogeneity-aware (HTA) and minimum hop (MinHop).

Both see only what they need: HTA the processing speed and battery of each
available node, MinHop the hop distance from the consumer at max power.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional


class BaselineKind(str, enum.Enum):
    HTA = "hta"
    MINHOP = "minhop"


@dataclass(frozen=True)
class HtaView:
    node_id: int
    cpi: float
    cct: float
    battery: float

    @property
    def speed(self) -> float:
        return 1.0 / (self.cpi * self.cct)


def hta_allocate(candidates: Iterable[HtaView]) -> Optional[int]:
    """Fastest node; larger battery, then lower id, break ties."""
    best = None
    for c in candidates:
        key = (-c.speed, -c.battery, c.node_id)
        if best is None or key < best[0]:
            best = (key, c.node_id)
    return None if best is None else best[1]


def minhop_allocate(candidates: Iterable[int], hops: Mapping[int, float]) -> Optional[int]:
    """Available node with the fewest hops from the consumer; lowest id on ties.
    Unreachable nodes (infinite or missing hop count) are skipped."""
    best = None
    for node in candidates:
        h = hops.get(node, math.inf)
        if math.isinf(h):
            continue
        key = (h, node)
        if best is None or key < best:
            best = key
    return None if best is None else best[1]
