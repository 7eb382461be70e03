"""Exact offline answers: the optimal schedule and the penalty-minimizing tau-schedule.

Both come from a single :class:`~resched.problems.ScheduleTable` per instance,
so a query is a vectorized filter over its entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import TIE_TOL, ActionSchedule, CostBreakdown, Instance, ReschedError, close, val
from .problems.base import DEFAULT_CAPS, Caps, ScheduleTable


class CompletionSearchError(ReschedError):
    """No all-jobs phase was found within the search bound."""


@dataclass(frozen=True)
class PrizeCollectingResult:
    schedule: ActionSchedule
    value: float
    completed: frozenset[int]
    tau: float


class Oracle:
    def __init__(self, instance: Instance, caps: Caps = DEFAULT_CAPS):
        self.instance = instance
        self.table = ScheduleTable(instance.jobs, instance.environment, caps)
        self._arrival = np.array([j.arrival for j in instance.jobs])
        self._weight = np.array([j.weight for j in instance.jobs])
        self._opt = None

    def arrived_mask(self, tau: float) -> int:
        mask = 0
        for i in np.flatnonzero(self._arrival <= tau):
            mask |= 1 << int(i)
        return mask

    def _pick(self, candidates: np.ndarray, score: np.ndarray) -> int:
        """Deterministic argmin: value, then cost, then job count, then ids, then actions."""
        t = self.table
        best = score[candidates].min()
        near = candidates[score[candidates] <= best + TIE_TOL * max(1.0, abs(best))]
        cheapest = t.cost[near].min()
        near = near[t.cost[near] <= cheapest + TIE_TOL * max(1.0, abs(cheapest))]
        fewest = t.size[near].min()
        near = near[t.size[near] == fewest]
        return int(min(near, key=lambda i: (t.ids_of(int(t.masks[i])), t.entries[i].actions)))

    def best_tau_schedule(self, tau: float, arrived=None) -> PrizeCollectingResult:
        """S_tau: the tau-schedule minimizing completed cost plus tau per unit of missed weight."""
        if arrived is None:
            amask = self.arrived_mask(tau)
        else:
            amask = self.table.mask_of(arrived)
        ids = frozenset(self.table.ids_of(amask))
        total = math.fsum(self.instance.jobs[r].weight for r in ids)
        ok = np.flatnonzero(self.table.feasible(tau, amask))
        score = self.table.cost + tau * (total - self.table.mask_weight)
        i = self._pick(ok, score)
        schedule = self.table.schedule(i, tau)
        return PrizeCollectingResult(schedule, val(schedule, tau, ids, self.instance), schedule.completed, tau)

    def optimal_offline(self) -> tuple[CostBreakdown, ActionSchedule]:
        if self._opt is None:
            t = self.table
            full = np.flatnonzero(t.masks == t.full_mask())
            cheapest = t.cost[full].min()
            near = full[t.cost[full] <= cheapest + TIE_TOL * max(1.0, cheapest)]
            i = int(min(near, key=lambda k: (t.cost[k], t.entries[k].actions)))
            duration = math.nextafter(float(t.last[i]), math.inf)
            schedule = t.schedule(i, duration)
            self._opt = (CostBreakdown.from_completions(schedule.completions, self.instance), schedule)
        return self._opt

    def opt_cost(self) -> float:
        return self.optimal_offline()[0].total

    def detect_completion_phase(self, grid, max_k: int = 30) -> int:
        """Smallest K >= 1 such that every S_eta(m + K*M) completes all jobs at optimal cost."""
        opt = self.opt_cost()
        everyone = frozenset(range(len(self.instance.jobs)))
        for k in range(1, max_k + 1):
            good = True
            for m in range(grid.M):
                res = self.best_tau_schedule(grid.eta(m + k * grid.M))
                cost = math.fsum(self.instance.jobs[r].weight * c for r, c in res.schedule.completions.items())
                if res.completed != everyone or not close(cost, opt):
                    good = False
                    break
            if good:
                return k
        raise CompletionSearchError(f"no phase up to K={max_k} completes all jobs at optimal cost")


@lru_cache(maxsize=256)
def get_oracle(instance: Instance, caps: Caps = DEFAULT_CAPS) -> Oracle:
    return Oracle(instance, caps)


def optimal_offline(instance: Instance, caps: Caps = DEFAULT_CAPS) -> tuple[CostBreakdown, ActionSchedule]:
    return get_oracle(instance, caps).optimal_offline()


def best_tau_schedule(tau: float, arrived, instance: Instance, caps: Caps = DEFAULT_CAPS) -> PrizeCollectingResult:
    return get_oracle(instance, caps).best_tau_schedule(tau, arrived)


def detect_completion_phase(instance: Instance, grid, max_k: int = 30, caps: Caps = DEFAULT_CAPS) -> int:
    return get_oracle(instance, caps).detect_completion_phase(grid, max_k)


__all__ = [
    "CompletionSearchError", "Oracle", "PrizeCollectingResult", "best_tau_schedule",
    "detect_completion_phase", "get_oracle", "optimal_offline",
]
