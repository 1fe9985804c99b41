"""Deterministic discrete-event core.

A single :class:`Simulator` owns the virtual clock and a heap of pending
events ordered by ``(fire_at, seq)``. Random numbers come from named
streams so that one subsystem drawing more values never shifts another
subsystem's sequence.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

# Event kinds used by the simulation. Purely informational for traces.
MOBILITY_STEP = "mobility-step"
MESSAGE_DELIVERY = "message-delivery"
TASK_PROGRESS = "task-progress"
TIMER = "timer"
LINK_STATE_CHANGE = "link-state-change"


class SchedulingError(ValueError):
    """Raised when an event is scheduled in the past."""


@dataclass(order=True)
class Event:
    fire_at: float
    seq: int
    kind: str = field(compare=False, default=TIMER)
    action: Optional[Callable[..., Any]] = field(compare=False, default=None, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self) -> None:
        self.cancelled = True


class SimClock:
    """Virtual time in seconds. Only the simulator advances it."""

    def __init__(self, start: float = 0.0):
        if start < 0:
            raise ValueError("clock cannot start before zero")
        self._now = float(start)

    @property
    def now(self) -> float:
        return self._now

    def _advance(self, t: float) -> None:
        if t < self._now:
            raise SchedulingError(f"clock moving backwards: {t} < {self._now}")
        self._now = t


def stream_key(stream_id: str) -> int:
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(stream_id.encode("utf-8"))


class RngStreams:
    """Named, independently seeded generators derived from one run seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def get(self, stream_id: str) -> np.random.Generator:
        gen = self._streams.get(stream_id)
        if gen is None:
            gen = make_stream(self.seed, stream_id)
            self._streams[stream_id] = gen
        return gen

    __getitem__ = get


def make_stream(seed: int, stream_id: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(stream_id)]))


class Simulator:
    """Event queue plus clock.

    Events at equal ``fire_at`` run in the order they were scheduled.
    """

    def __init__(self, start: float = 0.0, record_trace: bool = False):
        self.clock = SimClock(start)
        self._queue: list[Event] = []
        self._seq = 0
        self.processed = 0
        self.trace: Optional[list[tuple[float, int, str]]] = [] if record_trace else None

    @property
    def now(self) -> float:
        return self.clock.now

    def schedule(self, event: Event) -> int:
        if event.fire_at < self.clock.now:
            raise SchedulingError(
                f"event at {event.fire_at} scheduled before now={self.clock.now}"
            )
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event.seq

    def at(self, t: float, action: Callable[..., Any], *args: Any, kind: str = TIMER) -> Event:
        ev = Event(float(t), 0, kind, action, args)
        self.schedule(ev)
        return ev

    def after(self, delay: float, action: Callable[..., Any], *args: Any, kind: str = TIMER) -> Event:
        return self.at(self.clock.now + delay, action, *args, kind=kind)

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def peek_time(self) -> Optional[float]:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].fire_at if self._queue else None

    def run_until(self, t_end: float) -> int:
        """Process every event with ``fire_at <= t_end``; leave the clock at ``t_end``."""
        if t_end < self.clock.now:
            raise SchedulingError(f"run_until({t_end}) is before now={self.clock.now}")
        count = 0
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.clock._advance(ev.fire_at)
            if self.trace is not None:
                self.trace.append((ev.fire_at, ev.seq, ev.kind))
            if ev.action is not None:
                ev.action(*ev.args)
            count += 1
        self.clock._advance(t_end)
        self.processed += count
        return count
