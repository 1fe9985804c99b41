"""Resource pool, protocol timers and control-message handling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .messages import (
    BROADCAST,
    MDIRM,
    MIM,
    MIUM,
    NIM,
    NIRM,
    NIUM,
    TIM,
    CancelTask,
    MemberInfo,
)
from .model import Status, TaskRecord


@dataclass(frozen=True)
class NiumThresholds:
    queue_s: float = 0.2
    memory_bytes: float = 0.2
    battery_j: float = 0.2


@dataclass(frozen=True)
class ProtocolTimers:
    x: float = 10.0  # NIM period
    m: int = 3  # missed NIM periods before eviction
    z: float = 15.0  # TIM period
    mim_period: float = 30.0
    thresholds: NiumThresholds = field(default_factory=NiumThresholds)
    failure_grace: float = 2.0
    # a member's update is relayed at most this often
    mium_min_interval: float = 10.0

    def __post_init__(self):
        if self.x <= 0 or self.z <= 0 or self.mim_period <= 0:
            raise ValueError("timer periods must be positive")
        if self.m < 1:
            raise ValueError("eviction multiplier must be >= 1")

    @property
    def eviction_s(self) -> float:
        return self.m * self.x


@dataclass
class ResourcePoolEntry:
    node_id: int
    cpi: float
    cct: float
    queue_waiting_time: float = 0.0
    memory_available: float = 0.0
    battery_available: float = 0.0
    power_level: int = 0
    link_quality: float = 0.0
    link_lifetime: float = 0.0
    avg_dropped_lost: float = 0.0
    last_nim_at: float = 0.0
    available: bool = True
    has_dynamic: bool = False

    @property
    def speed(self) -> float:
        return 1.0 / (self.cpi * self.cct)


@dataclass(frozen=True)
class DynamicState:
    queue_waiting_time: float
    memory: float
    battery: float


@dataclass
class ResourcePool:
    entries: dict[int, ResourcePoolEntry] = field(default_factory=dict)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, node_id: int) -> Optional[ResourcePoolEntry]:
        return self.entries.get(node_id)

    def available(self) -> list[ResourcePoolEntry]:
        return [self.entries[k] for k in sorted(self.entries) if self.entries[k].available]

    def is_available(self, node_id: int) -> bool:
        e = self.entries.get(node_id)
        return e is not None and e.available

    def set_dynamic(self, node_id: int, q: float, mem: float, bat: float) -> bool:
        e = self.entries.get(node_id)
        if e is None:
            return False
        e.queue_waiting_time = max(q, 0.0)
        e.memory_available = max(mem, 0.0)
        e.battery_available = max(bat, 0.0)
        e.has_dynamic = True
        return True


def evict_stale(pool: ResourcePool, now: float, timers: ProtocolTimers) -> list[int]:
    """Mark entries silent for longer than m*x unavailable; returns newly evicted ids."""
    out = []
    limit = timers.eviction_s
    for nid in sorted(pool.entries):
        e = pool.entries[nid]
        fresh = now - e.last_nim_at <= limit
        if e.available and not fresh:
            out.append(nid)
        e.available = fresh
    return out


def relative_change(old: float, new: float) -> float:
    if old == new:
        return 0.0
    if old == 0:
        return math.inf
    return abs(new - old) / abs(old)


def crosses_threshold(old: DynamicState, new: DynamicState, th: NiumThresholds) -> bool:
    return (
        relative_change(old.queue_waiting_time, new.queue_waiting_time) > th.queue_s
        or relative_change(old.memory, new.memory) > th.memory_bytes
        or relative_change(old.battery, new.battery) > th.battery_j
    )


@dataclass
class NiumTracker:
    node_id: int
    last_sent: DynamicState

    def maybe_send(self, current: DynamicState, th: NiumThresholds) -> Optional[NIUM]:
        if not crosses_threshold(self.last_sent, current, th):
            return None
        return self.force(current)

    def force(self, current: DynamicState) -> NIUM:
        self.last_sent = current
        return NIUM(self.node_id, current.queue_waiting_time, current.memory, current.battery, BROADCAST)


def maybe_send_nium(tracker: NiumTracker, current: DynamicState, th: NiumThresholds) -> Optional[NIUM]:
    return tracker.maybe_send(current, th)


@dataclass
class NodeMiddleware:
    """Message-driven state held by one node."""

    node_id: int
    cpi: float
    cct: float
    timers: ProtocolTimers
    tracker: NiumTracker
    pool: ResourcePool = field(default_factory=ResourcePool)
    # task queue, populated at the master node only
    tasks: Optional[dict[int, TaskRecord]] = None
    malformed: int = 0
    # member id -> (time, snapshot) of the last relayed update
    mium_sent: dict[int, tuple[float, DynamicState]] = field(default_factory=dict)
    # when the current migration of a task was decided
    migration_started: dict[int, float] = field(default_factory=dict)

    def own_dynamic(self) -> DynamicState:
        return self.tracker.last_sent


def _valid_number(*vals: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) and v >= 0 for v in vals)


def process_control_message(state: NodeMiddleware, msg, now: float, current: Optional[DynamicState] = None) -> list:
    """Apply ``msg`` at ``state`` and return the replies to send.

    ``current`` is the receiver's live dynamic state, used when a NIRM asks
    for it. Malformed messages are counted and dropped.
    """
    pool = state.pool
    me = state.node_id
    out: list = []
    if isinstance(msg, NIM):
        if msg.node_id == me:
            return out
        if not _valid_number(msg.cpi, msg.cct) or msg.cpi == 0 or msg.cct == 0:
            state.malformed += 1
            return out
        e = pool.get(msg.node_id)
        if e is None:
            pool.entries[msg.node_id] = ResourcePoolEntry(msg.node_id, msg.cpi, msg.cct, last_nim_at=now)
            out.append(NIRM(me, msg.node_id))
        else:
            e.cpi, e.cct = msg.cpi, msg.cct
            e.last_nim_at = now
            e.available = True
        return out
    if isinstance(msg, NIRM):
        if msg.dst != me:
            return out
        out.append(state.tracker.force(current if current is not None else state.own_dynamic()))
        return out
    if isinstance(msg, NIUM):
        if msg.node_id == me:
            return out
        if not _valid_number(msg.queue_waiting_time, msg.memory, msg.battery):
            state.malformed += 1
            return out
        if pool.set_dynamic(msg.node_id, msg.queue_waiting_time, msg.memory, msg.battery):
            snap = DynamicState(msg.queue_waiting_time, msg.memory, msg.battery)
            prev = state.mium_sent.get(msg.node_id)
            if prev is None or (
                now - prev[0] >= state.timers.mium_min_interval and crosses_threshold(prev[1], snap, state.timers.thresholds)
            ):
                state.mium_sent[msg.node_id] = (now, snap)
                out.append(MIUM(me, msg.node_id, snap.queue_waiting_time, snap.memory, snap.battery, BROADCAST))
        return out
    if isinstance(msg, MIUM):
        if msg.member_id == me or msg.dst not in (BROADCAST, me):
            return out
        if not _valid_number(msg.queue_waiting_time, msg.memory, msg.battery):
            state.malformed += 1
            return out
        pool.set_dynamic(msg.member_id, msg.queue_waiting_time, msg.memory, msg.battery)
        return out
    if isinstance(msg, MIM):
        unknown = []
        for mem in msg.members:
            if mem.member_id == me:
                continue
            if not _valid_number(mem.cpi, mem.cct, mem.age) or mem.cpi == 0 or mem.cct == 0:
                state.malformed += 1
                continue
            seen = now - mem.age
            e = pool.get(mem.member_id)
            if e is None:
                pool.entries[mem.member_id] = ResourcePoolEntry(mem.member_id, mem.cpi, mem.cct, last_nim_at=seen)
                pool.entries[mem.member_id].available = now - seen <= state.timers.eviction_s
                unknown.append(mem.member_id)
            elif seen > e.last_nim_at:
                e.last_nim_at = seen
                e.available = now - seen <= state.timers.eviction_s
        if unknown:
            out.append(MDIRM(me, tuple(unknown), msg.node_id))
        return out
    if isinstance(msg, MDIRM):
        if msg.dst != me:
            return out
        for mid in msg.member_ids:
            e = pool.get(mid)
            if e is not None and e.has_dynamic:
                out.append(MIUM(me, mid, e.queue_waiting_time, e.memory_available, e.battery_available, msg.src))
        return out
    if isinstance(msg, TIM):
        if state.tasks is None or msg.dst != me:
            return out
        stale = []
        for rep in msg.tasks:
            rec = state.tasks.get(rep.task_id)
            if rec is None:
                state.malformed += 1
                continue
            if rec.status is Status.COMPLETED and rep.attempt == rec.attempt:
                continue
            if rep.attempt != rec.attempt or rec.status in (Status.QUEUED, Status.FAILED, Status.COMPLETED):
                # superseded or already written off: the holder should drop it
                stale.append(rep)
                continue
            apply_task_report(state, rec, msg.node_id, rep, now)
        for rep in stale:
            out.append(CancelTask(rep.task_id, rep.attempt))
        return out
    state.malformed += 1
    return out


def apply_task_report(state: NodeMiddleware, rec: TaskRecord, node: int, rep, now: float) -> None:
    """Fold one TIM entry for the current attempt into the task queue."""
    if rec.status is Status.MIGRATING:
        # the source keeps reporting until it clones the task; a long silence
        # from the target means the migration never happened
        rec.last_heard = now
        started = state.migration_started.get(rec.task_id, now)
        if node == rec.assigned_node and now - started > state.timers.z:
            rec.transition(Status.EXECUTING, now)
            rec.set_progress(rep.progress)
        return
    if node != rec.assigned_node:
        return
    rec.last_heard = now
    if rec.status is Status.DISPATCHED:
        rec.transition(Status.EXECUTING, now)
    rec.set_progress(rep.progress)
    if rep.status == "completed":
        rec.transition(Status.COMPLETED, now)


def detect_task_failure(state: NodeMiddleware, now: float) -> list[TaskRecord]:
    """Tasks with no TIM coverage for grace*z are failed and sent back to the queue."""
    if state.tasks is None:
        return []
    limit = state.timers.failure_grace * state.timers.z
    failed = []
    for tid in sorted(state.tasks):
        rec = state.tasks[tid]
        if rec.status in (Status.DISPATCHED, Status.EXECUTING, Status.MIGRATING) and now - rec.last_heard > limit:
            rec.transition(Status.FAILED, now)
            rec.failures += 1
            state.migration_started.pop(tid, None)
            failed.append(rec)
    return failed


def member_list(pool: ResourcePool, now: float, exclude: int) -> tuple[MemberInfo, ...]:
    return tuple(
        MemberInfo(e.node_id, e.cpi, e.cct, max(now - e.last_nim_at, 0.0))
        for e in pool.available()
        if e.node_id != exclude
    )
