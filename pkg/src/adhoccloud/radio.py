"""Log-distance radio, RSSI distance estimation and unit-disk delivery.

Power levels are numbered from 1 (lowest) to k (maximum), matching the
per-level routing tables RTP_1 .. RTP_k.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

MIN_DISTANCE_M = 1.0


class Delivery(str, enum.Enum):
    DELIVERED = "delivered"
    LOST = "lost"
    OUT_OF_RANGE = "out-of-range"


class Unreachable(ValueError):
    """Distance beyond the maximum transmission range."""


def default_packet_energy(tx_power_dbm: Sequence[float], packet_bits: int, bitrate_bps: float) -> list[float]:
    """Radiated energy of one full packet: P_tx (W) times airtime."""
    airtime = packet_bits / bitrate_bps
    return [10 ** (p / 10.0) * 1e-3 * airtime for p in tx_power_dbm]


@dataclass
class RadioConfig:
    tx_power_dbm: list[float] = field(default_factory=lambda: [0.0, 6.0, 9.5])
    range_m: list[float] = field(default_factory=lambda: [60.0, 120.0, 180.0])
    interference_range_extra_m: float = 20.0
    path_loss_exponent: float = 2.0
    rx_success_ratio: float = 0.95
    # joules for one full-size packet at each level; None -> derived from tx power
    energy_per_packet_j: Optional[list[float]] = None
    packet_bits: int = 512 * 8
    bitrate_bps: float = 2e6

    def __post_init__(self):
        if len(self.tx_power_dbm) != len(self.range_m) or not self.range_m:
            raise ValueError("tx_power_dbm and range_m must be non-empty and the same length")
        for seq, name in ((self.tx_power_dbm, "tx_power_dbm"), (self.range_m, "range_m")):
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if self.path_loss_exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if not 0.0 <= self.rx_success_ratio <= 1.0:
            raise ValueError("rx_success_ratio must lie in [0, 1]")
        if self.energy_per_packet_j is None:
            self.energy_per_packet_j = default_packet_energy(
                self.tx_power_dbm, self.packet_bits, self.bitrate_bps
            )
        if len(self.energy_per_packet_j) != len(self.range_m):
            raise ValueError("one packet energy per power level required")
        if any(b < a for a, b in zip(self.energy_per_packet_j, self.energy_per_packet_j[1:])):
            raise ValueError("packet energy must be non-decreasing in power level")

    @property
    def levels(self) -> int:
        return len(self.range_m)

    @property
    def max_level(self) -> int:
        return len(self.range_m)

    @property
    def max_range(self) -> float:
        return self.range_m[-1]

    def range_of(self, level: int) -> float:
        return self.range_m[level - 1]

    def tx_power(self, level: int) -> float:
        return self.tx_power_dbm[level - 1]

    def packet_energy(self, level: int, size_bits: Optional[float] = None) -> float:
        """Energy for one packet at ``level``; partial-size packets scale linearly."""
        e = self.energy_per_packet_j[level - 1]
        if size_bits is None:
            return e
        return e * size_bits / self.packet_bits

    def max_only(self) -> "RadioConfig":
        """Same radio restricted to its maximum power level."""
        return RadioConfig(
            tx_power_dbm=[self.tx_power_dbm[-1]],
            range_m=[self.range_m[-1]],
            interference_range_extra_m=self.interference_range_extra_m,
            path_loss_exponent=self.path_loss_exponent,
            rx_success_ratio=self.rx_success_ratio,
            energy_per_packet_j=[self.energy_per_packet_j[-1]],
            packet_bits=self.packet_bits,
            bitrate_bps=self.bitrate_bps,
        )


def rssi(tx_power_dbm: float, distance_m: float, n: float) -> float:
    """Received power under the log-distance model; distances under 1 m count as 1 m."""
    d = max(float(distance_m), MIN_DISTANCE_M)
    return tx_power_dbm - 10.0 * n * math.log10(d)


def estimate_distance(tx_power_dbm: float, rssi_dbm: float, n: float) -> float:
    if n <= 0:
        raise ValueError("n must be positive")
    return 10.0 ** ((tx_power_dbm - rssi_dbm) / (10.0 * n))


def min_power_level(distance_m: float, radio: RadioConfig) -> int:
    """Lowest level whose range covers ``distance_m`` (boundary inclusive)."""
    for level, r in enumerate(radio.range_m, start=1):
        if distance_m <= r:
            return level
    raise Unreachable(f"{distance_m:.2f} m exceeds max range {radio.max_range} m")


def deliverable(distance_m: float, level: int, radio: RadioConfig, rng: np.random.Generator) -> Delivery:
    r = radio.range_of(level)
    if distance_m <= r:
        if radio.rx_success_ratio >= 1.0 or rng.random() < radio.rx_success_ratio:
            return Delivery.DELIVERED
        return Delivery.LOST
    if distance_m <= r + radio.interference_range_extra_m:
        return Delivery.LOST
    return Delivery.OUT_OF_RANGE


def pairwise_distances(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))
