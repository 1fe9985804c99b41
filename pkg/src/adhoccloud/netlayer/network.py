"""Network-layer runtime: link states, route construction, packet accounting
and hop-by-hop data transfer on top of the event engine."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..engine import MESSAGE_DELIVERY, Event, Simulator
from ..radio import Delivery, RadioConfig, deliverable, pairwise_distances
from .discovery import start_discovery
from .estimation import HEADER_BITS, PACKET_BITS, LinkStats, ewma, link_quality, packets_for
from .lifetime import Boundaries, LinkLifetimeModel, classify_lifetime, link_down, link_up, predict_lifetime
from .routing import NoRoute, RouteChoice, RouteEntry, RoutingTableSet, select_route

# routes kept per destination and table
MAX_ROUTES = 3
BROADCAST = -1
# unicast control frames are retried this many times per hop
CONTROL_ARQ = 3
PROCESSING_DELAY_S = 1e-3
HELLO_BYTES = 16


@dataclass(frozen=True)
class PacketRecord:
    time: float
    src: int
    dst: int
    level: int
    kind: str
    outcome: str
    count: int
    energy_j: float
    plane: str  # "control" or "data"


@dataclass
class TransferOutcome:
    elapsed_s: float = 0.0
    energy_j: float = 0.0
    packets_sent: int = 0
    packets_lost: int = 0
    hops: int = 0
    reroutes: int = 0
    failed: bool = False
    reason: str = ""


@dataclass
class Transfer:
    src: int
    dest: int
    bits: float
    kind: str
    on_done: Callable[["Transfer"], None]
    on_fail: Callable[["Transfer"], None]
    path: list[int] = field(default_factory=list)
    levels: list[int] = field(default_factory=list)
    holder: int = -1
    hop_index: int = 0
    # bits still to cross the current hop (a broken hop keeps its delivered share)
    pending_bits: float = 0.0
    started_at: float = 0.0
    outcome: TransferOutcome = field(default_factory=TransferOutcome)
    # active-hop bookkeeping
    hop_event: Optional[Event] = None
    hop_start: float = 0.0
    hop_duration: float = 0.0
    hop_rate: float = 0.0
    hop_attempts: int = 0
    hop_packets: int = 0
    hop_level: int = 0
    hop_pair: tuple[int, int] = (-1, -1)
    cancelled: bool = False
    tag: object = None


@dataclass
class NetConfig:
    packet_bits: int = PACKET_BITS
    header_bits: int = HEADER_BITS
    b_channel: float = 2e6
    dl_weight: float = 0.2
    # a hop waits while its link quality is below this share of the channel
    min_share: float = 0.25
    route_repair_s: float = 1.0
    boundaries: Boundaries = field(default_factory=Boundaries)
    # "lifetime": power/lifetime-aware selection; "min_hop": fewest hops at max power
    route_policy: str = "lifetime"


class Network:
    def __init__(
        self,
        sim: Simulator,
        radio: RadioConfig,
        positions: np.ndarray,
        cfg: NetConfig,
        rng_loss: np.random.Generator,
        use_discovery: bool = True,
        level_offset: int = 0,
    ):
        self.sim = sim
        self.radio = radio
        self.cfg = cfg
        self.rng = rng_loss
        self.n = len(positions)
        self.k = radio.levels
        self.use_discovery = use_discovery
        # trace levels are reported against the full radio's numbering
        self.level_offset = level_offset
        self.pos = np.array(positions, dtype=float)
        self.dist = pairwise_distances(self.pos)
        self.up = self._link_masks(self.dist)
        self.stats = LinkStats(b_channel=cfg.b_channel)
        self.tables = [RoutingTableSet(self.k) for _ in range(self.n)]
        self.models: dict[tuple[int, int, int], LinkLifetimeModel] = {}
        self.avg_dl: dict[tuple[int, int], float] = {}
        self.records: list[PacketRecord] = []
        self.version = 0
        self._graph_cache: dict = {}
        self._active: dict[tuple[int, int, int], list[Transfer]] = {}
        self._waiting: deque[Transfer] = deque()
        self._broadcast_id = 0
        self.alive = np.ones(self.n, dtype=bool)
        self.link_changes = 0
        # called as hook(a, b, level) after a link goes down
        self.link_down_hook: Optional[Callable[[int, int, int], None]] = None
        for lvl, a, b in zip(*np.nonzero(np.triu(self.up, 1))):
            link_up(self._model(int(a), int(b), int(lvl) + 1), sim.now)
        if not use_discovery:
            self._neighbour_tables_from_truth()

    def _log(self, time, src, dst, level, kind, outcome, count, energy, plane) -> None:
        self.records.append(PacketRecord(time, src, dst, level + self.level_offset, kind, outcome, count, energy, plane))

    # ------------------------------------------------------------------ links
    def _link_masks(self, dist: np.ndarray) -> np.ndarray:
        # up[level-1, a, b] == reachable at that level
        masks = np.stack([dist <= r for r in self.radio.range_m])
        idx = np.arange(self.n)
        masks[:, idx, idx] = False
        return masks

    def _model(self, a: int, b: int, level: int) -> LinkLifetimeModel:
        key = (min(a, b), max(a, b), level)
        m = self.models.get(key)
        if m is None:
            m = LinkLifetimeModel(self.cfg.boundaries)
            self.models[key] = m
        return m

    def link_is_up(self, a: int, b: int, level: int) -> bool:
        return bool(self.up[level - 1, a, b]) and self.alive[a] and self.alive[b]

    def neighbours(self, node: int, level: int) -> np.ndarray:
        return np.flatnonzero(self.up[level - 1, node])

    def update_positions(self, positions: np.ndarray) -> int:
        """Apply a mobility step; returns the number of link state changes."""
        now = self.sim.now
        self.pos = np.array(positions, dtype=float)
        self.dist = pairwise_distances(self.pos)
        new_up = self._link_masks(self.dist)
        changed = np.triu(new_up ^ self.up, 1)
        if not changed.any():
            self.up = new_up
            return 0
        self.up = new_up
        lv, aa, bb = np.nonzero(changed)
        for lvl, a, b in zip(lv.tolist(), aa.tolist(), bb.tolist()):
            model = self._model(a, b, lvl + 1)
            if new_up[lvl, a, b]:
                link_up(model, now)
            else:
                link_down(model, now)
                self._break_link(a, b, lvl + 1)
                if self.link_down_hook is not None:
                    self.link_down_hook(a, b, lvl + 1)
        if not self.use_discovery:
            self._neighbour_tables_from_truth()
        self.version += 1
        self.link_changes += len(lv)
        return len(lv)

    def _neighbour_tables_from_truth(self) -> None:
        # hello-based neighbour sets for single-level (max power) operation
        for a in range(self.n):
            t = RoutingTableSet(self.k)
            for b in self.neighbours(a, self.k).tolist():
                t.add(RouteEntry(next_node=b, dest_node=b, power_level=self.k))
            self.tables[a] = t

    # -------------------------------------------------------------- discovery
    def discover(self, origin: int) -> int:
        """Discovery round from ``origin``; returns control packets sent."""
        self._broadcast_id += 1
        recs = start_discovery(
            origin, self.pos, self.radio, self.tables[origin], self.rng, self._broadcast_id,
            alive=lambda j: bool(self.alive[j]),
        )
        now = self.sim.now
        for r in recs:
            bits = r.packet.size_bits
            e = self.radio.packet_energy(r.level, bits)
            dst = BROADCAST if r.receiver is None else r.receiver
            outcome = "sent" if r.outcome is None else r.outcome.value
            self._log(now, r.sender, dst, r.level, "discovery-" + r.packet.kind.value, outcome, 1, e, "control")
        self.version += 1
        return len(recs)

    def account_hellos(self, levels: list[int], nodes: list[int]) -> None:
        """Per-table link monitoring beacons, one per node and level, logged in bulk."""
        now = self.sim.now
        for lvl in levels:
            e = self.radio.packet_energy(lvl, HELLO_BYTES * 8)
            self._log(now, BROADCAST, BROADCAST, lvl, "hello", "sent", len(nodes), e * len(nodes), "control")

    # ---------------------------------------------------------------- routing
    def _hop_level(self, a: int, b: int) -> Optional[int]:
        for lvl in self.tables[a].levels_with(b):
            if any(r.path == (b,) for r in self.tables[a].routes(b, lvl)):
                return lvl
        return None

    def _graph(self) -> list[dict[int, int]]:
        """Discovered direct neighbours a -> {b: discovered level}."""
        key = ("graph", self.version)
        g = self._graph_cache.get(key)
        if g is not None:
            return g
        g = []
        for a in range(self.n):
            edges: dict[int, int] = {}
            if self.alive[a]:
                for lvl in range(self.k, 0, -1):
                    for b, routes in self.tables[a].table(lvl).items():
                        if any(r.path == (b,) for r in routes):
                            edges[b] = lvl
            g.append(edges)
        self._graph_cache = {key: g}
        return g

    def _adj(self, level: int) -> list[list[int]]:
        """Edges usable when transmitting at ``level``: discovered at or below
        it and currently up at it."""
        key = ("adj", self.version, level)
        adj = self._graph_cache.get(key)
        if adj is not None:
            return adj
        g = self._graph()
        up = self.up[level - 1]
        adj = [
            sorted(b for b, lvl in g[a].items() if lvl <= level and up[a, b] and self.alive[b])
            for a in range(self.n)
        ]
        self._graph_cache[key] = adj
        return adj

    def _hop_distances(self, level: int) -> np.ndarray:
        """All-pairs hop counts over the edges usable at ``level``."""
        key = ("hops", self.version, level)
        d = self._graph_cache.get(key)
        if d is not None:
            return d
        adj = self._adj(level)
        d = np.full((self.n, self.n), np.inf)
        for src in range(self.n):
            d[src, src] = 0
            frontier = [src]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if d[src, v] == np.inf:
                            d[src, v] = d[src, u] + 1
                            nxt.append(v)
                frontier = nxt
        self._graph_cache[key] = d
        return d

    def _path_via(self, origin: int, first: int, dest: int, level: int) -> Optional[list[int]]:
        d = self._hop_distances(level)
        if d[first, dest] == np.inf:
            return None
        adj = self._adj(level)
        path = [first]
        u = first
        seen = {origin, first}
        while u != dest:
            options = [v for v in adj[u] if d[v, dest] == d[u, dest] - 1 and v not in seen]
            if not options:
                return None
            u = options[0]
            seen.add(u)
            path.append(u)
        return path

    def _hop_lq(self, a: int, b: int, level: int) -> float:
        return link_quality(a, b, self.stats, self.neighbours(a, level).tolist())

    def link_prediction(self, a: int, b: int, level: int):
        model = self._model(a, b, level)
        age = self.sim.now - model.up_since if model.up and model.up_since is not None else 0.0
        return predict_lifetime(model, at_least=classify_lifetime(age, model.boundaries))

    def build_entry(self, origin: int, path: list[int], table_level: int) -> RouteEntry:
        """Route entry for ``path`` with every hop sent at ``table_level``."""
        lvl = table_level if self.cfg.route_policy == "lifetime" else self.k
        hops = [origin] + path
        hop_stats = []
        lifetime = math.inf
        prob = 1.0
        for a, b in zip(hops, hops[1:]):
            lq = self._hop_lq(a, b, lvl)
            dl = self.avg_dl.get((a, b), 0.0)
            hop_stats.append((lq, dl))
            pred = self.link_prediction(a, b, lvl)
            lifetime = min(lifetime, pred.lifetime_s)
            prob *= pred.probability
        return RouteEntry(
            next_node=path[0],
            dest_node=path[-1],
            power_level=table_level,
            avg_dropped_lost=hop_stats[0][1],
            link_quality=min(s[0] for s in hop_stats),
            predicted_lifetime=lifetime,
            lifetime_probability=prob,
            path=tuple(path),
            hop_stats=tuple(hop_stats),
            hop_levels=(lvl,) * len(path),
        )

    def routes_from(self, origin: int) -> RoutingTableSet:
        """Multi-hop tables for ``origin``. RTP_i holds the destinations
        reachable over links usable at power i, shortest paths first, up to
        ``MAX_ROUTES`` routes via different next hops."""
        out = RoutingTableSet(self.k)
        if not self.alive[origin]:
            return out
        for level in range(1, self.k + 1):
            d = self._hop_distances(level)
            firsts = self._adj(level)[origin]
            for dest in range(self.n):
                if dest == origin or d[origin, dest] == np.inf:
                    continue
                cands = []
                for f in firsts:
                    if f == dest:
                        cands.append((1, f, [f]))
                        continue
                    if d[f, dest] == np.inf:
                        continue
                    p = self._path_via(origin, f, dest, level)
                    if p is not None:
                        cands.append((len(p), f, p))
                cands.sort(key=lambda c: (c[0], c[1]))
                for _, _, p in cands[:MAX_ROUTES]:
                    out.add(self.build_entry(origin, p, level))
        return out

    def choose_route(self, origin: int, dest: int, bits: float) -> RouteChoice:
        tables = self.routes_from(origin)
        if self.cfg.route_policy == "min_hop":
            levels = tables.levels_with(dest)
            if not levels:
                raise NoRoute(dest)
            routes = [r for lvl in levels for r in tables.routes(dest, lvl)]
            best = min(routes, key=lambda r: (r.hops, r.path))
            return RouteChoice(best, math.nan, fallback=False)
        return select_route(dest, bits, tables, self.cfg.packet_bits, self.cfg.header_bits)

    def hop_count(self, origin: int, dest: int) -> float:
        return float(self._hop_distances(self.k)[origin, dest])

    # ------------------------------------------------------ control messages
    def broadcast(self, src: int, size_bytes: int, kind: str, on_receive: Callable[[int], None]) -> None:
        """One max-power transmission; each receiver in range draws delivery."""
        if not self.alive[src]:
            return
        lvl = self.k
        bits = size_bytes * 8
        e = self.radio.packet_energy(lvl, bits)
        now = self.sim.now
        self._log(now, src, BROADCAST, lvl, kind, "sent", 1, e, "control")
        reach = self.radio.max_range + self.radio.interference_range_extra_m
        cand = np.flatnonzero(self.dist[src] <= reach).tolist()
        receivers = []
        for j in cand:
            if j == src or not self.alive[j]:
                continue
            if deliverable(float(self.dist[src, j]), lvl, self.radio, self.rng) is Delivery.DELIVERED:
                receivers.append(j)
        if receivers:
            delay = bits / self.cfg.b_channel + PROCESSING_DELAY_S
            self.sim.after(delay, self._deliver_all, receivers, on_receive, kind=MESSAGE_DELIVERY)

    @staticmethod
    def _deliver_all(receivers: list[int], on_receive: Callable[[int], None]) -> None:
        for j in receivers:
            on_receive(j)

    def _control_path(self, src: int, dst: int) -> Optional[tuple[list[int], list[int]]]:
        """Fewest hops at the lowest level that reaches ``dst``."""
        for level in range(1, self.k + 1):
            d = self._hop_distances(level)
            if d[src, dst] == np.inf:
                continue
            best = None
            for f in self._adj(level)[src]:
                if d[f, dst] != d[src, dst] - 1:
                    continue
                best = [f] if f == dst else self._path_via(src, f, dst, level)
                if best is not None:
                    break
            if best is not None:
                lvl = level if self.cfg.route_policy == "lifetime" else self.k
                return best, [lvl] * len(best)
        return None

    def unicast(
        self,
        src: int,
        dst: int,
        size_bytes: int,
        kind: str,
        on_delivered: Callable[[], None],
        on_lost: Optional[Callable[[], None]] = None,
    ) -> bool:
        """Send a small control message along a route with per-hop ARQ.

        Returns False when no route exists (nothing is transmitted)."""
        if src == dst:
            self.sim.after(0.0, on_delivered, kind=MESSAGE_DELIVERY)
            return True
        if not self.alive[src]:
            return False
        route = self._control_path(src, dst)
        if route is None:
            if on_lost is not None:
                self.sim.after(0.0, on_lost)
            return False
        path, levels = route
        bits = size_bytes * 8
        now = self.sim.now
        hop_delay = bits / self.cfg.b_channel + PROCESSING_DELAY_S
        a = src
        for b, lvl in zip(path, levels):
            e = self.radio.packet_energy(lvl, bits)
            ok = False
            tries = 0
            for _ in range(CONTROL_ARQ):
                tries += 1
                if deliverable(float(self.dist[a, b]), lvl, self.radio, self.rng) is Delivery.DELIVERED:
                    ok = True
                    break
            self._log(now, a, b, lvl, kind, "delivered" if ok else "lost", tries, e * tries, "control")
            if not ok:
                if on_lost is not None:
                    self.sim.after(hop_delay, on_lost)
                return True
            a = b
        self.sim.after(hop_delay * len(path), on_delivered, kind=MESSAGE_DELIVERY)
        return True

    # ---------------------------------------------------------- data transfer
    def transmit(
        self,
        src: int,
        dest: int,
        bits: float,
        kind: str,
        on_done: Callable[[Transfer], None],
        on_fail: Callable[[Transfer], None],
        route: Optional[RouteEntry] = None,
        tag: object = None,
    ) -> Transfer:
        """Move ``bits`` from ``src`` to ``dest`` hop by hop, store and forward."""
        tr = Transfer(src, dest, bits, kind, on_done, on_fail, holder=src, started_at=self.sim.now, tag=tag)
        if bits <= 0 or src == dest:
            self.sim.after(0.0, on_done, tr)
            return tr
        if route is None:
            try:
                route = self.choose_route(src, dest, bits).entry
            except NoRoute:
                tr.outcome.failed = True
                tr.outcome.reason = "no-route"
                self.sim.after(0.0, on_fail, tr)
                return tr
        self._set_route(tr, route)
        self._start_hop(tr)
        return tr

    def _set_route(self, tr: Transfer, route: RouteEntry) -> None:
        tr.path = list(route.path)
        tr.levels = list(route.levels()) if self.cfg.route_policy == "lifetime" else [self.k] * len(route.path)
        tr.hop_index = 0
        tr.pending_bits = tr.bits

    def cancel(self, tr: Transfer) -> None:
        tr.cancelled = True
        if tr.hop_event is not None:
            tr.hop_event.cancel()
            self._end_hop_traffic(tr)
        if tr in self._waiting:
            self._waiting.remove(tr)

    def _start_hop(self, tr: Transfer) -> None:
        if tr.cancelled:
            return
        a = tr.holder
        b = tr.path[tr.hop_index]
        lvl = tr.levels[tr.hop_index]
        if not self.link_is_up(a, b, lvl):
            self._hop_failed(tr, "link-down")
            return
        lq = self._hop_lq(a, b, lvl)
        if lq < self.cfg.min_share * self.cfg.b_channel and self._busy_near(a, lvl):
            self._waiting.append(tr)
            return
        lq = max(lq, self.cfg.min_share * self.cfg.b_channel)
        n = packets_for(tr.pending_bits, self.cfg.packet_bits, self.cfg.header_bits)
        p = self.radio.rx_success_ratio
        attempts = n if p >= 1.0 else int(self.rng.geometric(p, size=n).sum())
        duration = attempts * self.cfg.packet_bits / lq
        tr.hop_start = self.sim.now
        tr.hop_duration = duration
        tr.hop_rate = lq
        tr.hop_attempts = attempts
        tr.hop_packets = n
        tr.hop_level = lvl
        tr.hop_pair = (a, b)
        self.stats.add_traffic(a, lq)
        self.stats.add_traffic(b, lq)
        key = (min(a, b), max(a, b), lvl)
        self._active.setdefault(key, []).append(tr)
        tr.hop_event = self.sim.after(duration, self._hop_done, tr, kind=MESSAGE_DELIVERY)

    def _busy_near(self, a: int, lvl: int) -> bool:
        # a hop only defers while some neighbour actually carries traffic
        return any(self.stats.b_self.get(j, 0.0) > 0 for j in self.neighbours(a, lvl).tolist())

    def _end_hop_traffic(self, tr: Transfer) -> None:
        a, b = tr.hop_pair
        self.stats.remove_traffic(a, tr.hop_rate)
        self.stats.remove_traffic(b, tr.hop_rate)
        key = (min(a, b), max(a, b), tr.hop_level)
        lst = self._active.get(key)
        if lst and tr in lst:
            lst.remove(tr)
        tr.hop_event = None

    def _wake_waiting(self) -> None:
        if not self._waiting:
            return
        waiting = list(self._waiting)
        self._waiting.clear()
        for tr in waiting:
            self._start_hop(tr)

    def _account_hop(self, tr: Transfer, attempts: int, delivered: int, outcome: str) -> None:
        a, b = tr.hop_pair
        e = self.radio.packet_energy(tr.hop_level) * attempts
        self._log(self.sim.now, a, b, tr.hop_level, tr.kind, outcome, attempts, e, "data")
        o = tr.outcome
        o.energy_j += e
        o.packets_sent += attempts
        o.packets_lost += attempts - delivered
        self.stats.sent += attempts
        self.stats.delivered += delivered
        self.stats.dropped += attempts - delivered

    def _hop_done(self, tr: Transfer) -> None:
        self._end_hop_traffic(tr)
        a, b = tr.hop_pair
        lost = tr.hop_attempts - tr.hop_packets
        self._account_hop(tr, tr.hop_attempts, tr.hop_packets, "delivered")
        self.avg_dl[(a, b)] = ewma(self.avg_dl.get((a, b), 0.0), lost, self.cfg.dl_weight)
        tr.outcome.hops += 1
        tr.holder = b
        tr.hop_index += 1
        tr.pending_bits = tr.bits
        if tr.hop_index >= len(tr.path):
            tr.outcome.elapsed_s = self.sim.now - tr.started_at
            tr.on_done(tr)
        else:
            self._start_hop(tr)
        self._wake_waiting()

    def _break_link(self, a: int, b: int, level: int) -> None:
        for tr in list(self._active.get((min(a, b), max(a, b), level), [])):
            if tr.hop_event is None:
                continue
            tr.hop_event.cancel()
            frac = 0.0 if tr.hop_duration <= 0 else (self.sim.now - tr.hop_start) / tr.hop_duration
            frac = min(max(frac, 0.0), 1.0)
            attempts = int(tr.hop_attempts * frac)
            delivered = int(tr.hop_packets * frac)
            self._end_hop_traffic(tr)
            self._account_hop(tr, attempts, delivered, "interrupted")
            payload = self.cfg.packet_bits - self.cfg.header_bits
            tr.pending_bits = max(tr.pending_bits - delivered * payload, 1.0)
            self._hop_failed(tr, "link-break")
        self._wake_waiting()

    def _hop_failed(self, tr: Transfer, reason: str) -> None:
        tr.outcome.reason = reason
        self.sim.after(self.cfg.route_repair_s, self._reroute, tr)

    def _reroute(self, tr: Transfer) -> None:
        if tr.cancelled:
            return
        try:
            choice = self.choose_route(tr.holder, tr.dest, tr.pending_bits)
        except NoRoute:
            tr.outcome.failed = True
            tr.outcome.elapsed_s = self.sim.now - tr.started_at
            tr.on_fail(tr)
            return
        pending = tr.pending_bits
        self._set_route(tr, choice.entry)
        tr.pending_bits = pending
        tr.outcome.reroutes += 1
        self._start_hop(tr)

    # ---------------------------------------------------------------- totals
    def energy_total(self) -> float:
        return math.fsum(r.energy_j for r in self.records)

    def packet_totals(self) -> tuple[int, int]:
        control = sum(r.count for r in self.records if r.plane == "control")
        data = sum(r.count for r in self.records if r.plane == "data")
        return control, data
