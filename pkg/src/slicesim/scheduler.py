"""Intra-slice timeout-threshold scheduling over RBG grants.

Users with pending data are served in ascending order of the signed key
(tau - head_delay): packets already past the timeout sort first, ties break
on the lower user id.  Grants are issued one RBG at a time until the head
packet is covered at the user's current MCS or the slice budget at its
serving radio unit runs out; the loop then repeats over the remaining
backlog so a slice can use its whole budget in one TTI.

With defer_under_threshold set, a head packet younger than tau is held back
instead of served immediately.  Held traffic accumulates and is drained in
bursts once due, which is what makes the timeout an actual control knob on
resource usage rather than a pure reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domain import ResourceGrid


@dataclass
class Grant:
    user: int
    oru: int
    slice: str
    mod_order: int
    layers: int = 1
    rbg_slots: list[int] = field(default_factory=list)  # slot index in the slice range
    planned_bits: float = 0.0

    @property
    def n_rbgs(self) -> int:
        return len(self.rbg_slots)

    def n_rbs(self, grid: ResourceGrid) -> int:
        return self.n_rbgs * grid.rbs_per_rbg


def modulation_order(gamma: float, thresholds=(2.0, 15.0, 80.0),
                     orders=(2, 4, 6, 8)) -> int:
    """Map linear SINR to modulation order; breakpoints are lower-inclusive,
    so gamma equal to a threshold already earns the next order."""
    for t, o in zip(thresholds, orders):
        if gamma < t:
            return o
    return orders[len(thresholds)]


def rbg_capacity_bits(gamma: float, mod_order: int, grid: ResourceGrid,
                      layers: int = 1) -> float:
    """Bits one RBG can carry in one TTI: Shannon bound capped by what the
    chosen constellation fits on the RBG's resource elements."""
    shannon = (grid.rb_bandwidth_hz * grid.rbs_per_rbg
               * math.log2(1.0 + gamma) * grid.tti_s)
    symbol_cap = (mod_order * grid.symbols_per_tti * grid.subcarriers_per_rb
                  * grid.rbs_per_rbg * layers)
    return min(shannon, symbol_cap)


def schedule_slice(slice_id: str, queues: dict[int, list[tuple[float, float]]],
                   serving: dict[int, int], tau_s: float, now_s: float,
                   budgets: dict[int, int], rbg_bits: dict[int, float],
                   mod_orders: dict[int, int],
                   defer_under_threshold: bool = False) -> dict[int, Grant]:
    """Plan one TTI of grants for a slice.

    queues: per user, (remaining_bits, arrival_s) snapshots, head first
    budgets: RBGs still available per radio unit for this slice
    rbg_bits: planned per-RBG capacity per user at its current MCS
    Returns one merged Grant per served user.  budgets is updated in place.
    """
    pending = {k: list(q) for k, q in queues.items() if q}
    grants: dict[int, Grant] = {}
    slots_used = {m: 0 for m in budgets}

    while True:
        order = []
        for k, q in pending.items():
            delay = now_s - q[0][1]
            if defer_under_threshold and delay < tau_s:
                continue
            if budgets[serving[k]] <= 0:
                continue
            order.append((tau_s - delay, k))
        if not order:
            break
        order.sort()
        progress = False
        for _, k in order:
            q = pending.get(k)
            if not q:
                continue
            m = serving[k]
            need = q[0][0]
            covered = 0.0
            while covered < need and budgets[m] > 0:
                g = grants.get(k)
                if g is None:
                    g = grants[k] = Grant(user=k, oru=m, slice=slice_id,
                                          mod_order=mod_orders[k])
                g.rbg_slots.append(slots_used[m])
                slots_used[m] += 1
                budgets[m] -= 1
                g.planned_bits += rbg_bits[k]
                covered += rbg_bits[k]
                progress = True
            if covered >= need:
                q.pop(0)
                if not q:
                    del pending[k]
            # budget exhausted mid-head: the partial grant stands, the user
            # drops out of later rounds at this radio unit automatically
        if not progress:
            break
    return grants


def schedule_order(queues: dict[int, list[tuple[float, float]]], tau_s: float,
                   now_s: float) -> list[int]:
    """First-service order implied by the priority key, for one round."""
    keyed = sorted((tau_s - (now_s - q[0][1]), k)
                   for k, q in queues.items() if q)
    return [k for _, k in keyed]


def utilization(grants, grid: ResourceGrid) -> float:
    """Resource usage count of one TTI: sum of RBs x symbols x layers x
    modulation order over the slice's grants."""
    total = 0.0
    for g in grants:
        total += g.n_rbs(grid) * grid.symbols_per_tti * g.layers * g.mod_order
    return total


class UtilizationSeries:
    """Per-window utilization peaks with a running mean and drift signal."""

    def __init__(self):
        self.history: list[float] = []

    def record(self, window_max: float) -> tuple[float, float, float]:
        """Append one window peak; returns (peak, running mean, drift).

        Drift is (peak - mean) / mean with the mean taken over the whole
        recorded history including this window; a zero mean flags as 0.
        """
        self.history.append(window_max)
        mu = sum(self.history) / len(self.history)
        delta = 0.0 if mu == 0.0 else (window_max - mu) / mu
        return window_max, mu, delta


def expired_count(delays, d_max_s: float) -> int:
    """Completed packets whose total delay reached the budget (inclusive)."""
    return sum(1 for d in delays if d >= d_max_s)
