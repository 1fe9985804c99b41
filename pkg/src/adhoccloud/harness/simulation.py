"""Assemble a world from a scenario config, run it and collect metrics."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..engine import RngStreams, Simulator
from ..middleware.model import NodeSpec, Role, Status, TaskSpec
from ..middleware.runtime import CloudRuntime, RuntimeSettings
from ..mobility import MobilityGroup, advance_mobility, init_mobility
from ..netlayer.network import NetConfig, Network
from .config import ScenarioConfig
from .metrics import MetricsRecord, to_csv


def build_specs(cfg: ScenarioConfig, rng: np.random.Generator) -> list[NodeSpec]:
    hw = cfg.hardware
    names = sorted(hw.tiers)
    order = rng.permutation(cfg.n_nodes)
    batteries = np.clip(rng.normal(hw.battery_mean_j, hw.battery_spread_j, cfg.n_nodes), 0.0, None)
    overrides = {o.node_id: o for o in hw.nodes}
    specs = []
    for i in range(cfg.n_nodes):
        tier = hw.tiers[names[int(order[i]) % len(names)]]
        o = overrides.get(i)
        if o is not None and o.tier is not None:
            tier = hw.tiers[o.tier]
        # nodes outside every role list still carry the SPN tag but only relay
        role = Role.SMN if i == cfg.smn else Role.SCN if i in cfg.scns else Role.SPN
        spec = NodeSpec(
            node_id=i,
            role=role,
            cpi=tier.cpi,
            cct=tier.cct,
            phi=hw.phi,
            p_static=hw.p_static,
            active_gates=hw.active_gates,
            capacitance=hw.capacitance,
            voltage=hw.voltage,
            beta=hw.beta,
            memory_total=hw.memory_total,
            battery_j=float(batteries[i]),
        )
        if o is not None:
            for name in ("cpi", "cct", "phi", "battery_j", "memory_total", "p_static", "beta"):
                val = getattr(o, name)
                if val is not None:
                    setattr(spec, name, float(val))
            spec.frequency = 1.0 / spec.cct
        specs.append(spec)
    return specs


def build_workload(cfg: ScenarioConfig, rng: np.random.Generator) -> list[TaskSpec]:
    w = cfg.workload
    n = w.tasks
    arrivals = np.sort(w.start_s + rng.uniform(0.0, w.window_s, n))
    lo, hi = w.instructions
    instr = rng.integers(int(lo), int(hi) + 1, n) if n else np.zeros(0, dtype=int)
    inputs = rng.uniform(w.input_bits[0], w.input_bits[1], n)
    tasks = []
    for i in range(n):
        tasks.append(
            TaskSpec(
                task_id=i,
                instructions=float(instr[i]),
                code_bits=float(w.code_bits),
                input_bits=float(inputs[i]),
                output_bits=float(w.output_fraction * inputs[i]),
                scn=cfg.scns[i % len(cfg.scns)],
                submitted_at=float(arrivals[i]),
            )
        )
    return tasks


def default_groups(cfg: ScenarioConfig) -> list[MobilityGroup]:
    half = cfg.area_m / 2
    return [MobilityGroup(list(range(cfg.n_nodes)), speed=0.0, jitter_radius=half, jitter_step=0.0, start=(half, half))]


@dataclass
class RunResult:
    metrics: MetricsRecord
    runtime: CloudRuntime
    network: Network
    completion_times: dict[int, float]

    def trace_lines(self) -> list[str]:
        return render_trace(self)


class World:
    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        streams = RngStreams(cfg.seed)
        groups = cfg.groups or default_groups(cfg)
        self.mobility = init_mobility(groups, cfg.n_nodes, cfg.area_m, streams.get("placement"), cfg.fixed_offsets)
        # movement draws come from their own stream so all schemes share a trace
        self.mobility.rng = streams.get("mobility")
        specs = build_specs(cfg, streams.get("hardware"))
        workload = build_workload(cfg, streams.get("workload"))
        full = cfg.radio
        proposed = cfg.scheme == "proposed"
        multi = proposed and cfg.power_mode == "multi"
        radio = full if multi else full.max_only()
        net_cfg = NetConfig(
            b_channel=full.bitrate_bps,
            packet_bits=full.packet_bits,
            min_share=cfg.network.min_share,
            route_repair_s=cfg.network.route_repair_s,
            boundaries=cfg.boundaries,
            route_policy="lifetime" if proposed else "min_hop",
        )
        self.sim = Simulator()
        self.net = Network(
            self.sim, radio, self.mobility.positions(), net_cfg, streams.get("loss"),
            use_discovery=proposed, level_offset=full.levels - radio.levels,
        )
        settings = RuntimeSettings(
            scheme=cfg.scheme,
            allocation_tick_s=cfg.control.allocation_tick_s,
            submit_retry_s=cfg.control.submit_retry_s,
            notice_retry_s=cfg.control.notice_retry_s,
            max_failures=cfg.control.max_failures,
            hello_period_s=cfg.network.hello_period_s,
            discovery_period_s=cfg.network.discovery_period_s,
            reactive_discovery_s=cfg.network.reactive_discovery_s,
            mobility_dt_s=cfg.network.mobility_dt_s,
        )
        step = None if self.mobility.static else (lambda dt: advance_mobility(self.mobility, dt))
        self.runtime = CloudRuntime(
            self.sim, self.net, specs, cfg.timers, settings, cfg.migration, workload,
            streams.get("timers"), mobility_step=step, providers=cfg.providers,
        )

    def run(self) -> RunResult:
        cfg = self.cfg
        self.runtime.start()
        self.sim.run_until(cfg.sim_time_s)
        return self._collect()

    def _collect(self) -> RunResult:
        cfg = self.cfg
        rt = self.runtime
        horizon = cfg.sim_time_s
        audit = rt.run_audits(horizon)
        tasks = rt.mw[rt.smn].tasks
        done = {
            tid: rec.completed_at - rec.spec.submitted_at
            for tid, rec in sorted(tasks.items())
            if rec.status is Status.COMPLETED
        }
        control, data = self.net.packet_totals()
        m = MetricsRecord(
            scenario=cfg.name,
            scheme=cfg.scheme,
            power_mode=cfg.power_mode,
            seed=cfg.seed,
            tasks=cfg.workload.tasks,
            tasks_submitted=sum(1 for s in rt.workload if s.submitted_at <= horizon),
            tasks_completed=len(done),
            tasks_failed=sum(1 for r in tasks.values() if r.permanently_failed),
            tx_energy_j=self.net.energy_total(),
            control_packets=control,
            data_packets=data,
            migrations=rt.migrations,
            reallocations=rt.reallocations,
            violations=audit.violations,
        ).with_completions(list(done.values()))
        return RunResult(m, rt, self.net, done)


def render_trace(res: RunResult) -> list[str]:
    net_lines = (
        (r.time, 0, f"{r.time!r} PKT {r.src} {r.dst} {r.level} {r.kind} {r.outcome} {r.count} {r.energy_j!r} {r.plane}")
        for r in res.network.records
    )
    ev_lines = ((t, 1, f"{t!r} {text}") for t, text in res.runtime.events)
    lines = [line for _, _, line in heapq.merge(net_lines, ev_lines, key=lambda x: (x[0], x[1]))]
    tasks = res.runtime.mw[res.runtime.smn].tasks
    for tid, dt in res.completion_times.items():
        rec = tasks[tid]
        lines.append(f"{rec.completed_at!r} COMPLETE task={tid} submitted={rec.spec.submitted_at!r} duration={dt!r}")
    for line in res.runtime.audit.details:
        lines.append(f"AUDIT {line}")
    return lines


def simulate(cfg: ScenarioConfig) -> RunResult:
    return World(cfg).run()


def run_scenario(cfg: ScenarioConfig, out_dir: Optional[str | Path] = None) -> MetricsRecord:
    """Run one (config, seed, scheme) and optionally write metrics.csv and trace.log."""
    res = simulate(cfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(to_csv([res.metrics]))
        (out / "trace.log").write_text("\n".join(res.trace_lines()) + "\n")
    return res.metrics
