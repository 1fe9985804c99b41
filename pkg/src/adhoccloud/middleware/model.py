"""Node capabilities, tasks and the task status machine."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..netlayer.estimation import HEADER_BITS, PACKET_BITS, packets_for


class Role(str, enum.Enum):
    SMN = "SMN"
    SPN = "SPN"
    SCN = "SCN"


@dataclass
class NodeSpec:
    node_id: int
    role: Role = Role.SPN
    cpi: float = 1.0
    cct: float = 1e-9
    phi: float = 1e-3
    p_static: float = 0.1
    active_gates: float = 1.0
    capacitance: float = 1e-9
    voltage: float = 1.0
    frequency: Optional[float] = None  # defaults to 1 / cct
    beta: float = 1e-5
    memory_total: float = 512e6
    battery_j: float = 5000.0

    def __post_init__(self):
        self.role = Role(self.role)
        for name in ("cpi", "cct", "phi", "battery_j"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.frequency is None:
            self.frequency = 1.0 / self.cct if self.cct > 0 else 0.0

    @property
    def p_dynamic(self) -> float:
        return self.active_gates * self.capacitance * self.voltage**2 * self.frequency

    @property
    def alpha(self) -> float:
        return self.p_static + self.p_dynamic

    @property
    def speed(self) -> float:
        """Instructions per second."""
        return 1.0 / (self.cpi * self.cct)


class Status(str, enum.Enum):
    QUEUED = "queued"
    DISPATCHED = "dispatched"
    EXECUTING = "executing"
    MIGRATING = "migrating"
    COMPLETED = "completed"
    FAILED = "failed"


# dispatched->queued: the code/input transfer failed before arrival.
# failed->queued: a detected failure sends the task back for reallocation.
ALLOWED_TRANSITIONS = frozenset(
    {
        (Status.QUEUED, Status.DISPATCHED),
        (Status.DISPATCHED, Status.EXECUTING),
        (Status.DISPATCHED, Status.QUEUED),
        (Status.DISPATCHED, Status.FAILED),
        (Status.EXECUTING, Status.COMPLETED),
        (Status.EXECUTING, Status.FAILED),
        (Status.EXECUTING, Status.MIGRATING),
        (Status.MIGRATING, Status.EXECUTING),
        (Status.MIGRATING, Status.FAILED),
        (Status.FAILED, Status.QUEUED),
    }
)

TERMINAL = frozenset({Status.COMPLETED})


class IllegalTransition(RuntimeError):
    pass


@dataclass
class TaskSpec:
    task_id: int
    instructions: float
    code_bits: float = 100e3
    input_bits: float = 1e6
    output_bits: float = 1e5
    task_type: str = "generic"
    scn: int = -1
    submitted_at: float = 0.0
    memory_bytes: float = 0.0

    def __post_init__(self):
        if self.instructions < 0:
            raise ValueError("instruction count must be non-negative")

    @property
    def dispatch_bits(self) -> float:
        return self.code_bits + self.input_bits

    def packets(self, pkt_bits: int = PACKET_BITS, header_bits: int = HEADER_BITS) -> int:
        """P(T_i): packets to move code, input and output."""
        return packets_for(self.code_bits + self.input_bits + self.output_bits, pkt_bits, header_bits)


@dataclass
class TaskRecord:
    """Task-queue entry kept at the master node."""

    spec: TaskSpec
    status: Status = Status.QUEUED
    assigned_node: Optional[int] = None
    executed_instructions: float = 0.0
    attempt: int = 0
    history: list[tuple[float, str, str]] = field(default_factory=list)
    last_heard: float = 0.0
    completed_at: Optional[float] = None
    migrations: int = 0
    failures: int = 0
    dispatch_failures: int = 0
    permanently_failed: bool = False

    @property
    def task_id(self) -> int:
        return self.spec.task_id

    @property
    def progress(self) -> float:
        if self.spec.instructions <= 0:
            return 1.0 if self.status is Status.COMPLETED else 0.0
        return self.executed_instructions / self.spec.instructions

    def transition(self, new: Status, now: float) -> None:
        new = Status(new)
        if (self.status, new) not in ALLOWED_TRANSITIONS:
            raise IllegalTransition(f"task {self.task_id}: {self.status.value} -> {new.value}")
        self.history.append((now, self.status.value, new.value))
        self.status = new

    def set_progress(self, executed: float) -> None:
        self.executed_instructions = min(max(executed, 0.0), self.spec.instructions)
