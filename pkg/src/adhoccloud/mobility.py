"""Group mobility: each group's centroid walks between random waypoints,
members sit at a drifting offset around it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class MobilityGroup:
    members: list[int]
    speed: float = 1.0  # m/s
    jitter_radius: float = 30.0
    # drift of each member's offset per second of simulated time
    jitter_step: float = 0.5
    start: Optional[tuple[float, float]] = None
    # waypoints are drawn inside this box (xmin, ymin, xmax, ymax); None = whole area
    region: Optional[tuple[float, float, float, float]] = None


@dataclass
class MobilityState:
    area_m: float
    centroid: np.ndarray  # (G, 2)
    waypoint: np.ndarray  # (G, 2)
    speed: np.ndarray  # (G,)
    jitter_radius: np.ndarray  # (G,)
    jitter_step: np.ndarray  # (G,)
    region: np.ndarray  # (G, 4)
    group_of: np.ndarray  # (N,)
    offset: np.ndarray  # (N, 2)
    rng: np.random.Generator = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.group_of)

    def positions(self) -> np.ndarray:
        pos = self.centroid[self.group_of] + self.offset
        return np.clip(pos, 0.0, self.area_m)

    @property
    def static(self) -> bool:
        return bool(np.all(self.speed == 0) and np.all(self.jitter_step == 0))


def _draw_in_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def init_mobility(
    groups: Sequence[MobilityGroup],
    n_nodes: int,
    area_m: float,
    rng: np.random.Generator,
    fixed_offsets: Optional[dict[int, tuple[float, float]]] = None,
) -> MobilityState:
    """Place groups and members. ``fixed_offsets`` pins a member's offset (used for grids)."""
    G = len(groups)
    group_of = np.full(n_nodes, -1, dtype=int)
    for g, grp in enumerate(groups):
        for m in grp.members:
            if group_of[m] != -1:
                raise ValueError(f"node {m} belongs to more than one group")
            group_of[m] = g
    if np.any(group_of < 0):
        missing = np.flatnonzero(group_of < 0).tolist()
        raise ValueError(f"nodes without a mobility group: {missing}")

    region = np.zeros((G, 4))
    centroid = np.zeros((G, 2))
    for g, grp in enumerate(groups):
        box = grp.region or (0.0, 0.0, area_m, area_m)
        region[g] = box
        if grp.start is not None:
            centroid[g] = grp.start
        else:
            centroid[g] = [rng.uniform(box[0], box[2]), rng.uniform(box[1], box[3])]
    waypoint = np.array([[rng.uniform(b[0], b[2]), rng.uniform(b[1], b[3])] for b in region]).reshape(G, 2)

    offset = np.zeros((n_nodes, 2))
    for g, grp in enumerate(groups):
        idx = np.asarray(grp.members, dtype=int)
        offset[idx] = _draw_in_disk(rng, grp.jitter_radius, len(idx))
    for node, off in (fixed_offsets or {}).items():
        offset[node] = off

    return MobilityState(
        area_m=float(area_m),
        centroid=centroid,
        waypoint=waypoint,
        speed=np.array([g.speed for g in groups], dtype=float),
        jitter_radius=np.array([g.jitter_radius for g in groups], dtype=float),
        jitter_step=np.array([g.jitter_step for g in groups], dtype=float),
        region=region,
        group_of=group_of,
        offset=offset,
        rng=rng,
    )


def advance_mobility(state: MobilityState, dt: float) -> np.ndarray:
    """Move every group for ``dt`` seconds and return the new node positions."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = state.rng
    delta = state.waypoint - state.centroid
    dist = np.hypot(delta[:, 0], delta[:, 1])
    step = state.speed * dt
    moving = step > 0
    arrived = moving & (dist <= step)
    going = moving & ~arrived
    if np.any(going):
        frac = (step[going] / dist[going])[:, None]
        state.centroid[going] += delta[going] * frac
    for g in np.flatnonzero(arrived):
        state.centroid[g] = state.waypoint[g]
        b = state.region[g]
        state.waypoint[g] = [rng.uniform(b[0], b[2]), rng.uniform(b[1], b[3])]

    drift = state.jitter_step[state.group_of] * dt
    if np.any(drift > 0):
        state.offset += rng.normal(0.0, 1.0, state.offset.shape) * drift[:, None]
        radius = state.jitter_radius[state.group_of]
        norm = np.hypot(state.offset[:, 0], state.offset[:, 1])
        over = norm > radius
        if np.any(over):
            state.offset[over] *= (radius[over] / norm[over])[:, None]
    return state.positions()
