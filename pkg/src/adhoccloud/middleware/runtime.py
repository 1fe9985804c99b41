"""Event-driven middleware on top of the network layer.

One master node (SMN) keeps the task queue and allocates, consumers (SCN)
submit tasks and ship code/input, providers (SPN) queue and execute work,
report progress, return results and, under the proposed scheme, migrate.
Every node beacons NIM/MIM and answers the pool update requests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..engine import Event, Simulator
from ..netlayer.network import Network, Transfer
from ..netlayer.routing import NoRoute, RouteEntry, select_route
from ..baselines import HtaView, hta_allocate, minhop_allocate
from .allocation import allocate
from .costs import NodeLoad, estimate_queue_time
from .messages import (
    BROADCAST,
    MDIRM,
    MIM,
    MIUM,
    NIM,
    NIRM,
    NIUM,
    TIM,
    AllocationDecision,
    CancelTask,
    CompletionNotice,
    DispatchFailed,
    MigrationDecision,
    MigrationRequest,
    ResumeNotice,
    TaskReport,
    TaskSubmit,
    kind_of,
)
from .migration import MigrationContext, MigrationPolicy, check_migration_triggers
from .model import ALLOWED_TRANSITIONS, NodeSpec, Role, Status, TaskRecord, TaskSpec
from .pool import (
    DynamicState,
    NiumTracker,
    NodeMiddleware,
    ProtocolTimers,
    detect_task_failure,
    evict_stale,
    member_list,
    process_control_message,
)

_POOL_MESSAGES = (NIM, NIRM, NIUM, MIM, MDIRM, MIUM, TIM)
PARK_TIMEOUT_S = 10.0
REQUEST_COOLDOWN_S = 30.0
MAX_RETRIES = 50


@dataclass
class RuntimeSettings:
    scheme: str = "proposed"
    allocation_tick_s: float = 1.0
    submit_retry_s: float = 2.0
    notice_retry_s: float = 5.0
    max_failures: Optional[int] = None
    hello_period_s: float = 2.0
    discovery_period_s: float = 10.0
    reactive_discovery_s: float = 2.0
    mobility_dt_s: float = 1.0
    position_log_s: float = 60.0


@dataclass
class Job:
    spec: TaskSpec
    attempt: int
    # instructions this node has to run, and how many it has run
    total: int
    done: int = 0
    # executed on earlier nodes before a migration
    base: int = 0
    migrations: int = 0
    # waiting | running | migrating | parked | returning | done
    state: str = "waiting"
    started: float = 0.0
    finish_event: Optional[Event] = None
    transfer: Optional[Transfer] = None
    next_request_at: float = 0.0
    tried: tuple[int, ...] = ()
    park_event: Optional[Event] = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.spec.task_id, self.attempt)


@dataclass
class Provider:
    spec: NodeSpec
    battery: float
    jobs: list[Job] = field(default_factory=list)
    running: Optional[Job] = None

    def find(self, task_id: int, attempt: int) -> Optional[Job]:
        for j in self.jobs:
            if j.spec.task_id == task_id and j.attempt == attempt:
                return j
        return None


@dataclass
class Audit:
    unavailable_dispatch: int = 0
    illegal_transitions: int = 0
    work_mismatch: int = 0
    conservation: int = 0
    details: list[str] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.unavailable_dispatch + self.illegal_transitions + self.work_mismatch + self.conservation


class CloudRuntime:
    def __init__(
        self,
        sim: Simulator,
        net: Network,
        specs: list[NodeSpec],
        timers: ProtocolTimers,
        settings: RuntimeSettings,
        migration: MigrationPolicy,
        workload: list[TaskSpec],
        phases: np.random.Generator,
        mobility_step: Optional[Callable[[float], np.ndarray]] = None,
        providers: Optional[list[int]] = None,
    ):
        self.sim = sim
        self.net = net
        self.specs = specs
        self.timers = timers
        self.set = settings
        self.policy = migration
        self.workload = workload
        self.mobility_step = mobility_step
        self.n = len(specs)
        self.smn = next(s.node_id for s in specs if s.role is Role.SMN)
        if providers is None:
            providers = [s.node_id for s in specs if s.role is Role.SPN]
        self.spns = frozenset(providers)
        self.proposed = settings.scheme == "proposed"
        self.providers = {i: Provider(specs[i], specs[i].battery_j) for i in sorted(self.spns)}
        self.mw = [
            NodeMiddleware(
                s.node_id, s.cpi, s.cct, timers,
                NiumTracker(s.node_id, DynamicState(2 * s.phi, s.memory_total, s.battery_j)),
            )
            for s in specs
        ]
        self.mw[self.smn].tasks = {}
        self.result_time: dict[tuple[int, int], float] = {}
        self.exec_log: dict[tuple[int, int], dict[int, int]] = {}
        self.routes: dict[tuple, RouteEntry] = {}
        self.scn_seen: set[tuple[int, int]] = set()
        self.scn_pending: set[int] = set()
        self.events: list[tuple[float, str]] = []
        self.audit = Audit()
        self.migrations = 0
        self.reallocations = 0
        self._bid = [0] * self.n
        self._last_discovery = [-math.inf] * self.n
        # phases drawn in a fixed order so every scheme sees the same schedule
        self._ph = {
            name: phases.uniform(0.0, period, self.n)
            for name, period in (
                ("nim", timers.x),
                ("mim", timers.mim_period),
                ("tim", timers.z),
                ("disc", settings.discovery_period_s),
                ("mon", migration.monitor_period),
            )
        }

    # ------------------------------------------------------------ startup
    def start(self) -> None:
        sim, s = self.sim, self.set
        if self.net.use_discovery:
            self.net.link_down_hook = self._on_link_down
            for i in range(self.n):
                sim.at(0.01 * (i + 1), self._discover, i)
                sim.at(self._ph["disc"][i] + s.discovery_period_s, self._periodic_discovery, i)
        sim.at(0.0, self._hello_tick)
        for i in range(self.n):
            sim.at(self._ph["nim"][i], self._nim_tick, i)
            sim.at(self._ph["mim"][i] + self.timers.mim_period, self._mim_tick, i)
        for i in sorted(self.spns):
            sim.at(self._ph["tim"][i], self._tim_tick, i)
            if self.proposed and self.policy.enabled:
                sim.at(self._ph["mon"][i], self._monitor_tick, i)
        sim.at(s.allocation_tick_s, self._allocation_tick)
        if self.mobility_step is not None:
            sim.at(s.mobility_dt_s, self._mobility_tick)
        sim.at(0.0, self._position_log)
        for spec in self.workload:
            sim.at(spec.submitted_at, self._submit, spec)

    def log(self, text: str) -> None:
        self.events.append((self.sim.now, text))

    # ------------------------------------------------------------ network upkeep
    def _mobility_tick(self) -> None:
        pos = self.mobility_step(self.set.mobility_dt_s)
        self.net.update_positions(pos)
        self.sim.after(self.set.mobility_dt_s, self._mobility_tick)

    def _position_log(self) -> None:
        flat = " ".join(f"{v:.3f}" for v in self.net.pos.ravel())
        self.log(f"POS {flat}")
        self.sim.after(self.set.position_log_s, self._position_log)

    def _hello_tick(self) -> None:
        levels = list(range(1, self.net.k + 1)) if self.net.use_discovery else [self.net.k]
        alive = np.flatnonzero(self.net.alive).tolist()
        self.net.account_hellos(levels, alive)
        self.sim.after(self.set.hello_period_s, self._hello_tick)

    def _discover(self, node: int) -> None:
        self._last_discovery[node] = self.sim.now
        self.net.discover(node)

    def _periodic_discovery(self, node: int) -> None:
        self._discover(node)
        self.sim.after(self.set.discovery_period_s, self._periodic_discovery, node)

    def _on_link_down(self, a: int, b: int, level: int) -> None:
        for u, v in ((a, b), (b, a)):
            if self.net._hop_level(u, v) != level:
                continue
            if self.sim.now - self._last_discovery[u] < self.set.reactive_discovery_s:
                continue
            self._last_discovery[u] = self.sim.now
            self.sim.after(0.05, self.net.discover, u)

    # ------------------------------------------------------------ messaging
    def send(self, src: int, msg, dst: Optional[int] = None, on_ack=None, on_lost=None) -> None:
        if dst is None:
            dst = getattr(msg, "dst", BROADCAST)
        kind = kind_of(msg)
        size = msg.size_bytes()
        if dst == BROADCAST:
            self.net.broadcast(src, size, kind, lambda j: self.receive(j, src, msg))
            return

        def delivered():
            self.receive(dst, src, msg)
            if on_ack is not None:
                on_ack()

        self.net.unicast(src, dst, size, kind, delivered, on_lost)

    def send_reliable(self, src: int, msg, dst: int, still_needed: Callable[[], bool], on_ack=None, tries: int = 0) -> None:
        """Unicast, retried every notice period while ``still_needed()`` holds."""
        if not still_needed():
            return

        def lost():
            if tries < MAX_RETRIES:
                self.sim.after(
                    self.set.notice_retry_s, self.send_reliable, src, msg, dst, still_needed, on_ack, tries + 1
                )

        self.send(src, msg, dst, on_ack=on_ack, on_lost=lost)

    def dynamic(self, node: int) -> DynamicState:
        spec = self.specs[node]
        prov = self.providers.get(node)
        if prov is None:
            return DynamicState(2 * spec.phi, spec.memory_total, spec.battery_j)
        held = [j for j in prov.jobs if j.state not in ("returning", "done")]
        mem = spec.memory_total - sum((j.spec.code_bits + j.spec.input_bits) / 8 for j in held)
        return DynamicState(
            estimate_queue_time(self._own_load(node), spec.cpi, spec.cct, spec.phi),
            max(mem, 0.0),
            max(prov.battery, 0.0),
        )

    def _nium_check(self, node: int) -> None:
        msg = self.mw[node].tracker.maybe_send(self.dynamic(node), self.timers.thresholds)
        if msg is not None:
            self.send(node, msg)

    def receive(self, node: int, src: int, msg) -> None:
        if isinstance(msg, _POOL_MESSAGES):
            marks = self._history_marks(node, msg)
            replies = process_control_message(self.mw[node], msg, self.sim.now, self.dynamic(node))
            if marks:
                self._after_tim(marks)
            for r in replies:
                dst = msg.node_id if isinstance(r, CancelTask) else None
                self.send(node, r, dst)
            return
        handler = {
            TaskSubmit: self._smn_submit,
            AllocationDecision: self._scn_decision,
            DispatchFailed: self._smn_dispatch_failed,
            CompletionNotice: self._smn_completion,
            MigrationRequest: self._smn_migration_request,
            MigrationDecision: self._spn_migration_decision,
            ResumeNotice: self._smn_resume,
            CancelTask: self._spn_cancel,
        }.get(type(msg))
        if handler is None:
            self.mw[node].malformed += 1
            return
        handler(node, msg)

    # ------------------------------------------------------------ periodic beacons
    def _nim_tick(self, node: int) -> None:
        self._bid[node] += 1
        s = self.specs[node]
        self.send(node, NIM(node, s.cpi, s.cct, self._bid[node]))
        self._nium_check(node)
        self.sim.after(self.timers.x, self._nim_tick, node)

    def _mim_tick(self, node: int) -> None:
        now = self.sim.now
        pool = self.mw[node].pool
        evict_stale(pool, now, self.timers)
        members = member_list(pool, now, exclude=node)
        if members:
            self._bid[node] += 1
            self.send(node, MIM(node, members, self._bid[node]))
        self.sim.after(self.timers.mim_period, self._mim_tick, node)

    def _tim_tick(self, node: int) -> None:
        prov = self.providers[node]
        if prov.jobs:
            reports = tuple(
                TaskReport(j.spec.task_id, "completed" if j.state == "done" else "executing", j.attempt,
                           float(j.base + self._progress(node, j)))
                for j in prov.jobs
            )
            self.send(node, TIM(node, reports, self.smn))
        self.sim.after(self.timers.z, self._tim_tick, node)

    # ------------------------------------------------------------ consumer side
    def _submit(self, spec: TaskSpec) -> None:
        self.scn_pending.add(spec.task_id)
        self.log(f"SUBMIT task={spec.task_id} scn={spec.scn} instr={spec.instructions:.0f}")
        msg = TaskSubmit(spec.task_id, spec.scn, spec.submitted_at)
        self.send_reliable(
            spec.scn, msg, self.smn,
            lambda: spec.task_id in self.scn_pending,
            on_ack=lambda: self.scn_pending.discard(spec.task_id),
        )

    def _scn_decision(self, scn: int, msg: AllocationDecision) -> None:
        key = (msg.task_id, msg.attempt)
        if key in self.scn_seen:
            return
        self.scn_seen.add(key)
        spec = self.workload[msg.task_id]
        route = self.routes.get(("alloc",) + key)
        if route is not None and route.path != msg.path:
            route = None
        self.net.transmit(
            scn, msg.node, spec.dispatch_bits, "task-dispatch",
            on_done=lambda tr: self._job_arrived(msg.node, spec, msg.attempt, int(spec.instructions), 0, 0),
            on_fail=lambda tr: self._dispatch_failed(scn, msg.task_id, msg.attempt),
            route=route,
        )

    def _dispatch_failed(self, scn: int, task_id: int, attempt: int) -> None:
        self.log(f"DISPATCH-FAIL task={task_id} attempt={attempt}")
        rec = self.mw[self.smn].tasks
        self.send_reliable(
            scn, DispatchFailed(task_id, attempt), self.smn,
            lambda: rec[task_id].attempt == attempt and rec[task_id].status is Status.DISPATCHED,
        )

    def _result_arrived(self, node: int, job: Job) -> None:
        self.result_time.setdefault(job.key, self.sim.now)
        self.log(f"RESULT task={job.spec.task_id} attempt={job.attempt} from={node}")
        job.state = "done"
        job.transfer = None
        prov = self.providers[node]
        self.send_reliable(
            node, CompletionNotice(job.spec.task_id, job.attempt, node), self.smn,
            lambda: job in prov.jobs,
            on_ack=lambda: job in prov.jobs and prov.jobs.remove(job),
        )

    # ------------------------------------------------------------ master side
    def _record(self, task_id: int) -> Optional[TaskRecord]:
        return self.mw[self.smn].tasks.get(task_id)

    def _transition(self, rec: TaskRecord, new: Status) -> None:
        old = rec.status
        rec.transition(new, self.sim.now)
        self.log(f"TASK task={rec.task_id} attempt={rec.attempt} {old.value}->{new.value} node={rec.assigned_node}")

    def _smn_submit(self, smn: int, msg: TaskSubmit) -> None:
        tasks = self.mw[smn].tasks
        if msg.task_id in tasks:
            return
        spec = self.workload[msg.task_id]
        tasks[msg.task_id] = TaskRecord(spec, last_heard=self.sim.now)
        self.log(f"TASK task={msg.task_id} attempt=0 new->queued node=None")

    def _allocation_tick(self) -> None:
        now = self.sim.now
        smn = self.mw[self.smn]
        evict_stale(smn.pool, now, self.timers)
        for rec in detect_task_failure(smn, now):
            self.log(f"TASK task={rec.task_id} attempt={rec.attempt} ->failed node={rec.assigned_node}")
            self.reallocations += 1
            if self.set.max_failures is not None and rec.failures > self.set.max_failures:
                rec.permanently_failed = True
            else:
                self._transition(rec, Status.QUEUED)
        queued = sorted(
            (r for r in smn.tasks.values() if r.status is Status.QUEUED),
            key=lambda r: (r.spec.submitted_at, r.task_id),
        )
        for rec in queued:
            self._try_allocate(rec)
        self.sim.after(self.set.allocation_tick_s, self._allocation_tick)

    def _smn_load(self, node: int) -> NodeLoad:
        recs = [
            r for r in self.mw[self.smn].tasks.values()
            if r.assigned_node == node and r.status in (Status.DISPATCHED, Status.EXECUTING)
        ]
        running = max((r for r in recs if r.executed_instructions > 0), key=lambda r: r.executed_instructions, default=None)
        queued = [r.spec.instructions - r.executed_instructions for r in recs if r is not running]
        return NodeLoad(
            None if running is None else (running.spec.instructions, running.executed_instructions),
            sorted(queued),
        )

    def _alloc_kwargs(self) -> dict:
        hw = self.specs[self.smn]
        return dict(
            phi=hw.phi, alpha=hw.alpha, beta=hw.beta,
            pkt_bits=self.net.cfg.packet_bits, header_bits=self.net.cfg.header_bits,
            eligible=self.spns,
        )

    def _choose(self, rec: TaskRecord) -> Optional[tuple[int, Optional[RouteEntry]]]:
        spec = rec.spec
        pool = self.mw[self.smn].pool
        if self.set.scheme == "proposed":
            tables = self.net.routes_from(spec.scn)
            cand = allocate(spec, pool, tables, self._smn_load, **self._alloc_kwargs())
            return None if cand is None else (cand.node, cand.route)
        avail = [e for e in pool.available() if e.node_id in self.spns]
        if self.set.scheme == "hta":
            node = hta_allocate(HtaView(e.node_id, e.cpi, e.cct, e.battery_available) for e in avail)
        else:
            hops = {e.node_id: self.net.hop_count(spec.scn, e.node_id) for e in avail}
            node = minhop_allocate([e.node_id for e in avail], hops)
        return None if node is None else (node, None)

    def _try_allocate(self, rec: TaskRecord) -> None:
        choice = self._choose(rec)
        if choice is None:
            return
        node, route = choice
        if not self.mw[self.smn].pool.is_available(node):
            self.audit.unavailable_dispatch += 1
            self.audit.details.append(f"t={self.sim.now:.3f} task {rec.task_id} to unavailable node {node}")
        rec.attempt += 1
        rec.assigned_node = node
        rec.last_heard = self.sim.now
        rec.set_progress(0)
        self._transition(rec, Status.DISPATCHED)
        key = (rec.task_id, rec.attempt)
        self.exec_log[key] = {}
        if route is not None:
            self.routes[("alloc",) + key] = route
        msg = AllocationDecision(rec.task_id, rec.attempt, node, route.path if route is not None else ())
        attempt = rec.attempt
        self.send_reliable(
            self.smn, msg, rec.spec.scn,
            lambda: rec.attempt == attempt and rec.status is Status.DISPATCHED and key not in self.scn_seen,
        )

    def _smn_dispatch_failed(self, smn: int, msg: DispatchFailed) -> None:
        rec = self._record(msg.task_id)
        if rec is None or rec.attempt != msg.attempt or rec.status is not Status.DISPATCHED:
            return
        rec.dispatch_failures += 1
        self.reallocations += 1
        self._transition(rec, Status.QUEUED)

    def _finish_record(self, rec: TaskRecord, node: int) -> None:
        if rec.status in (Status.DISPATCHED, Status.MIGRATING):
            self._transition(rec, Status.EXECUTING)
        rec.assigned_node = node
        rec.set_progress(rec.spec.instructions)
        self._transition(rec, Status.COMPLETED)
        rec.completed_at = self.result_time[(rec.task_id, rec.attempt)]

    def _smn_completion(self, smn: int, msg: CompletionNotice) -> None:
        rec = self._record(msg.task_id)
        if rec is None or rec.attempt != msg.attempt:
            return
        if rec.status in (Status.DISPATCHED, Status.EXECUTING, Status.MIGRATING):
            self._finish_record(rec, msg.node)

    def _history_marks(self, node: int, msg) -> dict[int, int]:
        if not isinstance(msg, TIM) or node != self.smn:
            return {}
        tasks = self.mw[node].tasks
        return {r.task_id: len(tasks[r.task_id].history) for r in msg.tasks if r.task_id in tasks}

    def _after_tim(self, marks: dict[int, int]) -> None:
        for tid, mark in marks.items():
            rec = self._record(tid)
            for _, old, new in rec.history[mark:]:
                self.log(f"TASK task={tid} attempt={rec.attempt} {old}->{new} node={rec.assigned_node}")
            if rec.status is Status.COMPLETED and rec.completed_at is None:
                rec.completed_at = self.result_time[(rec.task_id, rec.attempt)]

    # ------------------------------------------------------------ provider side
    def _own_load(self, node: int) -> NodeLoad:
        prov = self.providers[node]
        running = None
        queued = []
        for j in prov.jobs:
            if j.state == "running":
                running = (float(j.total), float(self._progress(node, j)))
            elif j.state in ("waiting", "parked", "migrating"):
                queued.append(float(j.total - j.done))
        return NodeLoad(running, queued)

    def _progress(self, node: int, job: Job) -> int:
        if job.state != "running":
            return job.done
        s = self.specs[node]
        ran = self.sim.now - job.started - s.phi
        if ran <= 0:
            return job.done
        return min(job.total, job.done + int(math.floor(ran / (s.cpi * s.cct))))

    def _account(self, node: int, job: Job, new_done: int) -> None:
        log = self.exec_log.setdefault(job.key, {})
        log[node] = log.get(node, 0) + (new_done - job.done)
        job.done = new_done

    def _job_arrived(self, node: int, spec: TaskSpec, attempt: int, total: int, base: int, migrations: int) -> None:
        prov = self.providers[node]
        if prov.find(spec.task_id, attempt) is not None:
            return
        job = Job(spec, attempt, total, base=base, migrations=migrations)
        prov.jobs.append(job)
        self.log(f"ARRIVE task={spec.task_id} attempt={attempt} node={node} instr={total}")
        self._kick(node)
        self._nium_check(node)

    def _kick(self, node: int) -> None:
        prov = self.providers[node]
        if prov.running is not None:
            return
        job = next((j for j in prov.jobs if j.state == "waiting"), None)
        if job is None:
            return
        s = self.specs[node]
        job.state = "running"
        job.started = self.sim.now
        prov.running = job
        duration = 2 * s.phi + (job.total - job.done) * s.cpi * s.cct
        job.finish_event = self.sim.after(duration, self._job_finished, node, job)

    def _stop(self, node: int, job: Job) -> None:
        """Take ``job`` off the processor, keeping the work it has done."""
        prov = self.providers[node]
        if job.state != "running":
            return
        done = self._progress(node, job)
        job.finish_event.cancel()
        job.finish_event = None
        prov.battery -= self.specs[node].alpha * (self.sim.now - job.started)
        self._account(node, job, done)
        job.state = "waiting"
        prov.running = None

    def _job_finished(self, node: int, job: Job) -> None:
        prov = self.providers[node]
        prov.battery -= self.specs[node].alpha * (self.sim.now - job.started)
        self._account(node, job, job.total)
        job.finish_event = None
        prov.running = None
        job.state = "returning"
        self.log(f"EXEC-DONE task={job.spec.task_id} attempt={job.attempt} node={node}")
        self._send_result(node, job)
        self._kick(node)
        self._nium_check(node)

    def _send_result(self, node: int, job: Job) -> None:
        prov = self.providers[node]
        if job not in prov.jobs or job.state != "returning":
            return
        job.transfer = self.net.transmit(
            node, job.spec.scn, job.spec.output_bits, "task-result",
            on_done=lambda tr: self._result_arrived(node, job),
            on_fail=lambda tr: self.sim.after(self.set.notice_retry_s, self._send_result, node, job),
        )

    def _drop(self, node: int, job: Job) -> None:
        prov = self.providers[node]
        self._stop(node, job)
        if job.transfer is not None:
            self.net.cancel(job.transfer)
            job.transfer = None
        if job.park_event is not None:
            job.park_event.cancel()
        if job in prov.jobs:
            prov.jobs.remove(job)
        self._kick(node)
        self._nium_check(node)

    def _spn_cancel(self, node: int, msg: CancelTask) -> None:
        prov = self.providers.get(node)
        job = None if prov is None else prov.find(msg.task_id, msg.attempt)
        if job is None:
            return
        self.log(f"CANCEL task={msg.task_id} attempt={msg.attempt} node={node}")
        self._drop(node, job)

    # ------------------------------------------------------------ migration
    def _monitor_tick(self, node: int) -> None:
        self.sim.after(self.policy.monitor_period, self._monitor_tick, node)
        prov = self.providers[node]
        now = self.sim.now
        held = [j for j in prov.jobs if j.state in ("waiting", "running")]
        s = self.specs[node]
        ahead = 0.0
        for job in held:
            remaining = (job.total - self._progress(node, job)) * s.cpi * s.cct
            ahead += remaining
            if job.migrations >= self.policy.max_migrations or now < job.next_request_at:
                continue
            if remaining < self.policy.min_remaining_s:
                continue
            try:
                lifetime = self.net.choose_route(node, job.spec.scn, job.spec.output_bits).entry.predicted_lifetime
            except NoRoute:
                lifetime = 0.0
            ctx = MigrationContext(
                battery_j=prov.battery,
                battery_capacity_j=s.battery_j,
                remaining_s=remaining,
                route_lifetime_s=lifetime,
                tasks_held=len(held),
                migrations_done=job.migrations,
                current_e_ct=ahead,
                best_other_e_ct=self._best_elsewhere(node, job),
            )
            trig = check_migration_triggers(ctx, self.policy)
            if trig is None:
                continue
            job.next_request_at = now + REQUEST_COOLDOWN_S
            self.log(f"MIGRATE-REQ task={job.spec.task_id} attempt={job.attempt} node={node} reason={trig.value}")
            self.send(node, MigrationRequest(job.spec.task_id, job.attempt, node, trig.value), self.smn)
            break

    def _image_bits(self, spec: TaskSpec) -> float:
        return spec.code_bits + spec.input_bits + self.policy.state_bits

    def _best_elsewhere(self, node: int, job: Job) -> Optional[float]:
        pool = self.mw[node].pool
        others = [e for e in pool.available() if e.node_id in self.spns and e.node_id != node and e.has_dynamic]
        if not others:
            return None
        tables = self.net.routes_from(node)
        left = job.total - self._progress(node, job)
        best = None
        for e in others:
            try:
                choice = select_route(e.node_id, self._image_bits(job.spec), tables,
                                      self.net.cfg.packet_bits, self.net.cfg.header_bits)
            except NoRoute:
                continue
            if choice.fallback:
                continue
            t = choice.e_dtt + left * e.cpi * e.cct + e.queue_waiting_time
            best = t if best is None else min(best, t)
        return best

    def _smn_migration_request(self, smn: int, msg: MigrationRequest) -> None:
        rec = self._record(msg.task_id)
        ok = (
            rec is not None
            and rec.attempt == msg.attempt
            and rec.assigned_node == msg.src
            and (rec.status is Status.EXECUTING or (rec.status is Status.MIGRATING and msg.exclude))
        )
        target = None
        route = None
        if ok:
            evict_stale(self.mw[smn].pool, self.sim.now, self.timers)
            remaining = rec.spec.instructions - rec.executed_instructions
            cand = allocate(
                rec.spec, self.mw[smn].pool, self.net.routes_from(msg.src), self._smn_load,
                exclude={msg.src, *msg.exclude}, instructions=remaining, **self._alloc_kwargs(),
            )
            if cand is not None:
                target, route = cand.node, cand.route
                if rec.status is Status.EXECUTING:
                    self._transition(rec, Status.MIGRATING)
                self.mw[smn].migration_started[rec.task_id] = self.sim.now
                self.routes[("mig", msg.task_id, msg.attempt, target)] = route
        decision = MigrationDecision(msg.task_id, msg.attempt, target, route.path if route is not None else ())
        self.send(smn, decision, msg.src)

    def _spn_migration_decision(self, node: int, msg: MigrationDecision) -> None:
        prov = self.providers.get(node)
        job = None if prov is None else prov.find(msg.task_id, msg.attempt)
        if job is None or job.state in ("returning", "done", "migrating"):
            return
        if job.park_event is not None:
            job.park_event.cancel()
            job.park_event = None
        if msg.target is None:
            if job.state == "parked":
                self._resume_here(node, job)
            return
        self._stop(node, job)
        job.state = "migrating"
        target = msg.target
        route = self.routes.get(("mig", msg.task_id, msg.attempt, target))
        self.log(f"MIGRATE task={job.spec.task_id} attempt={job.attempt} {node}->{target} done={job.base + job.done}")
        job.transfer = self.net.transmit(
            node, target, self._image_bits(job.spec), "migration",
            on_done=lambda tr: self._image_arrived(node, target, job),
            on_fail=lambda tr: self._image_failed(node, target, job),
            route=route,
        )
        self._kick(node)

    def _image_arrived(self, src: int, target: int, job: Job) -> None:
        prov = self.providers[src]
        job.transfer = None
        if job not in prov.jobs:
            return
        prov.jobs.remove(job)
        self.migrations += 1
        self._nium_check(src)
        self._job_arrived(target, job.spec, job.attempt, job.total - job.done, job.base + job.done, job.migrations + 1)
        self._notify_resume(target, job.spec.task_id, job.attempt)

    def _notify_resume(self, node: int, task_id: int, attempt: int) -> None:
        prov = self.providers[node]
        self.send_reliable(
            node, ResumeNotice(task_id, attempt, node), self.smn,
            lambda: prov.find(task_id, attempt) is not None,
        )

    def _image_failed(self, src: int, target: int, job: Job) -> None:
        job.transfer = None
        if job not in self.providers[src].jobs:
            return
        job.tried = job.tried + (target,)
        if len(job.tried) <= self.policy.transfer_retries:
            job.state = "parked"
            self.send(src, MigrationRequest(job.spec.task_id, job.attempt, src, "retry", job.tried), self.smn)
            job.park_event = self.sim.after(PARK_TIMEOUT_S, self._park_timeout, src, job)
        else:
            self._resume_here(src, job)

    def _park_timeout(self, node: int, job: Job) -> None:
        job.park_event = None
        if job.state == "parked" and job in self.providers[node].jobs:
            self._resume_here(node, job)

    def _resume_here(self, node: int, job: Job) -> None:
        job.state = "waiting"
        self.log(f"RESUME-LOCAL task={job.spec.task_id} attempt={job.attempt} node={node}")
        self._kick(node)
        self._notify_resume(node, job.spec.task_id, job.attempt)

    def _smn_resume(self, smn: int, msg: ResumeNotice) -> None:
        rec = self._record(msg.task_id)
        if rec is None or rec.attempt != msg.attempt:
            return
        if rec.status is Status.MIGRATING:
            self._transition(rec, Status.EXECUTING)
        if rec.status is Status.EXECUTING:
            if msg.node != rec.assigned_node:
                rec.migrations += 1
            rec.assigned_node = msg.node
            rec.last_heard = self.sim.now
            self.mw[smn].migration_started.pop(rec.task_id, None)

    # ------------------------------------------------------------ audits
    def run_audits(self, horizon: float) -> Audit:
        a = self.audit
        tasks = self.mw[self.smn].tasks
        for rec in tasks.values():
            prev = Status.QUEUED
            for _, old, new in rec.history:
                if old != prev.value or (Status(old), Status(new)) not in ALLOWED_TRANSITIONS:
                    a.illegal_transitions += 1
                    a.details.append(f"task {rec.task_id}: {old}->{new}")
                prev = Status(new)
            if rec.status is Status.COMPLETED:
                executed = sum(self.exec_log.get((rec.task_id, rec.attempt), {}).values())
                if executed != int(rec.spec.instructions):
                    a.work_mismatch += 1
                    a.details.append(f"task {rec.task_id}: executed {executed} of {int(rec.spec.instructions)}")
        submitted = [s.task_id for s in self.workload if s.submitted_at <= horizon]
        for tid in submitted:
            if tid not in tasks and tid not in self.scn_pending:
                a.conservation += 1
                a.details.append(f"task {tid} lost between consumer and master")
        return a
