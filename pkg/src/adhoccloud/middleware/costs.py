"""Cost estimation models used by the allocator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..netlayer.estimation import HEADER_BITS, PACKET_BITS, estimate_dtt
from ..netlayer.routing import RouteEntry
from .model import NodeSpec, TaskSpec


def processing_time(instructions: float, cpi: float, cct: float) -> float:
    return instructions * cpi * cct


def residual_time(instructions: float, executed: float, cpi: float, cct: float) -> float:
    """Remaining CPU time of the task currently on the processor."""
    return (instructions - executed) * cpi * cct


@dataclass
class NodeLoad:
    """What a node is doing: the running task (total, executed) and the
    instruction counts of tasks waiting behind it."""

    executing: Optional[tuple[float, float]] = None
    queued: Sequence[float] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.queued) + (1 if self.executing else 0)


def estimate_processing_time(task: TaskSpec, node: NodeSpec) -> float:
    return processing_time(task.instructions, node.cpi, node.cct)


def estimate_queue_time(load: NodeLoad, cpi: float, cct: float, phi: float) -> float:
    e_pte = 0.0
    if load.executing is not None:
        total, done = load.executing
        e_pte = residual_time(total, done, cpi, cct)
    e_pt_tq = sum(processing_time(i, cpi, cct) for i in load.queued)
    m = len(load.queued)
    return e_pte + e_pt_tq + (m + 2) * phi


def transfer_time(task: TaskSpec, route: Optional[RouteEntry], pkt_bits: int = PACKET_BITS, header_bits: int = HEADER_BITS) -> float:
    """Code and input to the provider plus output back to the consumer."""
    if route is None:
        return 0.0
    return estimate_dtt(task.dispatch_bits, route, pkt_bits, header_bits) + estimate_dtt(
        task.output_bits, route, pkt_bits, header_bits
    )


@dataclass(frozen=True)
class CompletionEstimate:
    e_pt: float
    e_qt: float
    e_dtt: float

    @property
    def e_et(self) -> float:
        return self.e_pt + self.e_qt

    @property
    def e_ct(self) -> float:
        return self.e_et + self.e_dtt


def estimate_completion_time(
    task: TaskSpec,
    cpi: float,
    cct: float,
    phi: float,
    load: NodeLoad,
    route: Optional[RouteEntry],
    pkt_bits: int = PACKET_BITS,
    header_bits: int = HEADER_BITS,
    instructions: Optional[float] = None,
) -> CompletionEstimate:
    """``instructions`` overrides the task size (remaining work of a migrated task)."""
    instr = task.instructions if instructions is None else instructions
    return CompletionEstimate(
        e_pt=processing_time(instr, cpi, cct),
        e_qt=estimate_queue_time(load, cpi, cct, phi),
        e_dtt=transfer_time(task, route, pkt_bits, header_bits),
    )


def cpu_power(p_static: float, active_gates: float, capacitance: float, voltage: float, frequency: float) -> float:
    return p_static + active_gates * capacitance * voltage**2 * frequency


def energy_consumption(alpha: float, e_pt: float, beta: float, packets: float) -> float:
    return alpha * e_pt + beta * packets


def estimate_energy(task: TaskSpec, node: NodeSpec, pkt_bits: int = PACKET_BITS, header_bits: int = HEADER_BITS) -> float:
    return energy_consumption(node.alpha, estimate_processing_time(task, node), node.beta, task.packets(pkt_bits, header_bits))
