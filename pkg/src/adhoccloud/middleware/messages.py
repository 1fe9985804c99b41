"""Middleware control messages and their on-wire sizes.

Sizes follow the field layouts: one type byte, 2-byte node/task ids,
4-byte numeric fields, 1-byte status codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

TYPE_B = 1
ID_B = 2
NUM_B = 4
STATUS_B = 1

BROADCAST = -1


@dataclass(frozen=True)
class NIM:
    node_id: int
    cpi: float
    cct: float
    broadcast_id: int

    def size_bytes(self) -> int:
        return TYPE_B + ID_B + 2 * NUM_B + NUM_B


@dataclass(frozen=True)
class NIRM:
    src: int
    dst: int

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B


@dataclass(frozen=True)
class NIUM:
    node_id: int
    queue_waiting_time: float
    memory: float
    battery: float
    dst: int = BROADCAST

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B + 3 * NUM_B


@dataclass(frozen=True)
class MemberInfo:
    member_id: int
    cpi: float
    cct: float
    # seconds since the sender last heard from the member directly or
    # via a fresher relay; keeps relayed knowledge from refreshing itself
    age: float = 0.0


@dataclass(frozen=True)
class MIM:
    node_id: int
    members: tuple[MemberInfo, ...]
    broadcast_id: int

    def size_bytes(self) -> int:
        return TYPE_B + ID_B + NUM_B + len(self.members) * (ID_B + 3 * NUM_B)


@dataclass(frozen=True)
class MDIRM:
    src: int
    member_ids: tuple[int, ...]
    dst: int

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B + len(self.member_ids) * ID_B


@dataclass(frozen=True)
class MIUM:
    src: int
    member_id: int
    queue_waiting_time: float
    memory: float
    battery: float
    dst: int = BROADCAST

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B + 3 * NUM_B


@dataclass(frozen=True)
class TaskReport:
    task_id: int
    status: str
    attempt: int = 0
    # instructions executed so far on the reporting node
    progress: float = 0.0


@dataclass(frozen=True)
class TIM:
    node_id: int
    tasks: tuple[TaskReport, ...]
    dst: int

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B + len(self.tasks) * (2 * ID_B + STATUS_B + NUM_B)


ControlMessage = Union[NIM, NIRM, NIUM, MIM, MDIRM, MIUM, TIM]


# task-flow messages between SCN, SMN and SPN (steps of the dispatch and
# migration sequences); small control frames carried like the above


@dataclass(frozen=True)
class TaskSubmit:
    task_id: int
    scn: int
    submitted_at: float

    def size_bytes(self) -> int:
        # id, consumer, type, three sizes, instruction count
        return TYPE_B + 2 * ID_B + STATUS_B + 4 * NUM_B


@dataclass(frozen=True)
class AllocationDecision:
    task_id: int
    attempt: int
    node: int
    path: tuple[int, ...] = ()

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B + len(self.path) * ID_B


@dataclass(frozen=True)
class DispatchFailed:
    task_id: int
    attempt: int

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B


@dataclass(frozen=True)
class CompletionNotice:
    task_id: int
    attempt: int
    node: int

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B


@dataclass(frozen=True)
class MigrationRequest:
    task_id: int
    attempt: int
    src: int
    reason: str
    exclude: tuple[int, ...] = field(default=())

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B + STATUS_B + len(self.exclude) * ID_B


@dataclass(frozen=True)
class MigrationDecision:
    task_id: int
    attempt: int
    target: Optional[int]
    path: tuple[int, ...] = ()

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B + len(self.path) * ID_B


@dataclass(frozen=True)
class ResumeNotice:
    task_id: int
    attempt: int
    node: int

    def size_bytes(self) -> int:
        return TYPE_B + 3 * ID_B


@dataclass(frozen=True)
class CancelTask:
    task_id: int
    attempt: int

    def size_bytes(self) -> int:
        return TYPE_B + 2 * ID_B


def kind_of(msg) -> str:
    return type(msg).__name__
