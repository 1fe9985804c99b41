"""Migration trigger checks run by a provider on its monitoring tick."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class Trigger(str, enum.Enum):
    BATTERY = "battery"
    LINK_LIFETIME = "link-lifetime"
    OVERLOAD = "overload"
    UNDERLOAD = "underload"
    BETTER_NODE = "better-node"


@dataclass(frozen=True)
class MigrationPolicy:
    enabled: bool = True
    monitor_period: float = 5.0
    battery_fraction: float = 0.10
    # utilization = tasks held by the node; outside [under, over] triggers
    under_tasks: int = 0
    over_tasks: int = 4
    better_margin: float = 0.20
    # too little work left to be worth moving
    min_remaining_s: float = 5.0
    max_migrations: int = 2
    # bits of execution state shipped with code and input
    state_bits: float = 8e3
    transfer_retries: int = 1


@dataclass(frozen=True)
class MigrationContext:
    battery_j: float
    battery_capacity_j: float
    remaining_s: float
    route_lifetime_s: float
    tasks_held: int
    migrations_done: int = 0
    # estimated completion of the remaining work here and on the best other node
    current_e_ct: Optional[float] = None
    best_other_e_ct: Optional[float] = None


def check_migration_triggers(ctx: MigrationContext, policy: MigrationPolicy) -> Optional[Trigger]:
    if not policy.enabled or ctx.migrations_done >= policy.max_migrations:
        return None
    if ctx.remaining_s < policy.min_remaining_s:
        return None
    if ctx.battery_capacity_j > 0 and ctx.battery_j < policy.battery_fraction * ctx.battery_capacity_j:
        return Trigger.BATTERY
    if ctx.route_lifetime_s < ctx.remaining_s:
        return Trigger.LINK_LIFETIME
    if ctx.tasks_held > policy.over_tasks:
        return Trigger.OVERLOAD
    if ctx.tasks_held < policy.under_tasks:
        return Trigger.UNDERLOAD
    if (
        ctx.current_e_ct is not None
        and ctx.best_other_e_ct is not None
        and ctx.best_other_e_ct < (1.0 - policy.better_margin) * ctx.current_e_ct
    ):
        return Trigger.BETTER_NODE
    return None
