"""Markov-chain link lifetime predictor over short/medium/long intervals."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Interval(enum.IntEnum):
    S = 0
    M = 1
    L = 2


# M->S, L->M and L->S are not allowed
PERMITTED: dict[Interval, tuple[Interval, ...]] = {
    Interval.S: (Interval.S, Interval.M, Interval.L),
    Interval.M: (Interval.M, Interval.L),
    Interval.L: (Interval.L,),
}

ALLOWED_MASK = np.zeros((3, 3), dtype=bool)
for _src, _dsts in PERMITTED.items():
    for _d in _dsts:
        ALLOWED_MASK[_src, _d] = True


@dataclass(frozen=True)
class Boundaries:
    short_max: float = 30.0
    medium_max: float = 120.0

    def __post_init__(self):
        if not 0 < self.short_max < self.medium_max:
            raise ValueError("need 0 < short_max < medium_max")

    def lower_bound(self, interval: Interval) -> float:
        return (0.0, self.short_max, self.medium_max)[interval]


def classify_lifetime(duration_s: float, boundaries: Boundaries) -> Interval:
    if duration_s < 0:
        raise ValueError("duration must be non-negative")
    if duration_s <= boundaries.short_max:
        return Interval.S
    if duration_s <= boundaries.medium_max:
        return Interval.M
    return Interval.L


@dataclass
class LinkLifetimeModel:
    boundaries: Boundaries = field(default_factory=Boundaries)
    counts: np.ndarray = field(default_factory=lambda: np.zeros((3, 3), dtype=np.int64))
    prev_interval: Optional[Interval] = None
    up: bool = False
    up_since: Optional[float] = None
    # observed transitions the chain cannot represent (e.g. M followed by S)
    rejected: int = 0

    def probabilities(self) -> np.ndarray:
        return transition_matrix(self.counts)

    def current_state(self) -> Interval:
        return Interval.S if self.prev_interval is None else self.prev_interval


def transition_matrix(counts: np.ndarray) -> np.ndarray:
    """Row-normalised counts; rows without data get a uniform prior over permitted moves."""
    probs = np.zeros((3, 3))
    for i in range(3):
        row = np.where(ALLOWED_MASK[i], counts[i], 0).astype(float)
        total = row.sum()
        if total > 0:
            probs[i] = row / total
        else:
            probs[i] = ALLOWED_MASK[i] / ALLOWED_MASK[i].sum()
    return probs


def record_link_transition(model: LinkLifetimeModel, completed_lifetime_s: float) -> LinkLifetimeModel:
    """Fold one finished up-period into the transition counts (in place)."""
    interval = classify_lifetime(completed_lifetime_s, model.boundaries)
    prev = model.prev_interval
    if prev is not None:
        if ALLOWED_MASK[prev, interval]:
            model.counts[prev, interval] += 1
        else:
            model.rejected += 1
    model.prev_interval = interval
    return model


def link_up(model: LinkLifetimeModel, now: float) -> None:
    model.up = True
    model.up_since = now


def link_down(model: LinkLifetimeModel, now: float) -> None:
    if model.up and model.up_since is not None:
        record_link_transition(model, now - model.up_since)
    model.up = False
    model.up_since = None


@dataclass(frozen=True)
class Prediction:
    interval: Interval
    probability: float
    lifetime_s: float


def predict_lifetime(
    model: LinkLifetimeModel,
    current_interval: Optional[Interval] = None,
    at_least: Interval = Interval.S,
) -> Prediction:
    """Most probable next interval from the row of ``current_interval``.

    ``at_least`` conditions on survival: a link already up for longer than
    the short bound cannot end up short, so those cells are dropped and the
    row renormalised. Ties go to the shorter interval.
    """
    state = model.current_state() if current_interval is None else Interval(current_interval)
    candidates = [j for j in PERMITTED[state] if j >= at_least]
    if not candidates:
        # the link outlived everything the row allows; it is at least ``at_least``
        return Prediction(Interval(at_least), 1.0, model.boundaries.lower_bound(Interval(at_least)))
    row = model.counts[state]
    weights = np.array([row[j] for j in candidates], dtype=float)
    if weights.sum() <= 0:
        weights = np.ones(len(candidates))
    probs = weights / weights.sum()
    best = int(np.argmax(probs))  # first maximum = shortest interval
    interval = candidates[best]
    return Prediction(interval, float(probs[best]), model.boundaries.lower_bound(interval))
