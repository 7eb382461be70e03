"""Shared machinery for the problem backends.

Every backend implements an exhaustive depth-first search over its schedules.
The search reports each *clean* prefix (no job touched but unfinished) to a
:class:`ScheduleTable`, which keeps, per completed job set, the Pareto front of
(last completion time, cost).  That front answers every prize-collecting query
exactly: a tau-schedule completing set R exists iff some entry for R has
``last < tau``, and the cheapest such entry is optimal for R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from ..core import Action, ActionSchedule, Job, ReschedError


class OracleTooLarge(ReschedError):
    """Raised when an instance exceeds the desk-scale limits of exact search."""


@dataclass(frozen=True)
class Caps:
    max_jobs: int = 8
    max_machines: int = 3
    max_points: int = 8
    max_nodes: int = 3_000_000
    # preemptive dial-a-ride: intermediate drops allowed per object
    max_drops: int = 1


DEFAULT_CAPS = Caps()


@dataclass(frozen=True)
class Diagnostic:
    ok: bool
    rule: str | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


VALID = Diagnostic(True)


def invalid(rule: str, message: str) -> Diagnostic:
    return Diagnostic(False, rule, message)


class Entry(NamedTuple):
    last: float
    cost: float
    mask: int
    actions: tuple[Action, ...]


class SearchBudget:
    def __init__(self, limit: int):
        self.limit = limit
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.limit:
            raise OracleTooLarge(
                f"instance too large for exact oracle: search exceeded {self.limit} nodes")


class ScheduleTable:
    """Pareto fronts of all clean schedules of a job list.

    Bit ``i`` of a mask stands for ``jobs[i]``.
    """

    def __init__(self, jobs: Sequence[Job], environment, caps: Caps = DEFAULT_CAPS):
        self.jobs = tuple(jobs)
        self.environment = environment
        self.caps = caps
        environment.check_caps(self.jobs, caps)
        self._front: dict[int, list[Entry]] = {}
        self.budget = SearchBudget(caps.max_nodes)
        environment.search(self.jobs, self, caps)
        self._freeze()

    # called by the searches for every clean prefix
    def add(self, mask: int, last: float, cost: float, actions: list[Action]) -> None:
        front = self._front.get(mask)
        if front is None:
            self._front[mask] = [Entry(last, cost, mask, tuple(actions))]
            return
        keep = []
        for e in front:
            if e.last <= last and e.cost <= cost:
                if e.last < last or e.cost < cost:
                    return
                # exact tie: smaller action list wins
                acts = tuple(actions)
                if e.actions <= acts:
                    return
                continue
            if last <= e.last and cost <= e.cost:
                continue
            keep.append(e)
        keep.append(Entry(last, cost, mask, tuple(actions)))
        self._front[mask] = keep

    def _freeze(self) -> None:
        entries = [Entry(0.0, 0.0, 0, ())]
        for mask in sorted(self._front):
            entries.extend(sorted(self._front[mask]))
        self.entries: list[Entry] = entries
        self.last = np.array([e.last for e in entries])
        self.cost = np.array([e.cost for e in entries])
        self.masks = np.array([e.mask for e in entries], dtype=np.int64)
        weights = np.array([j.weight for j in self.jobs])
        bits = (self.masks[:, None] >> np.arange(len(self.jobs))[None, :]) & 1
        self.mask_weight = bits @ weights if len(self.jobs) else np.zeros(len(entries))
        self.size = bits.sum(axis=1) if len(self.jobs) else np.zeros(len(entries), dtype=int)
        self._index = {j.id: i for i, j in enumerate(self.jobs)}

    def mask_of(self, ids) -> int:
        mask = 0
        for r in ids:
            mask |= 1 << self._index[r]
        return mask

    def ids_of(self, mask: int) -> tuple[int, ...]:
        return tuple(j.id for i, j in enumerate(self.jobs) if mask >> i & 1)

    def feasible(self, tau: float, arrived_mask: int | None = None) -> np.ndarray:
        ok = self.last < tau
        ok[0] = True
        if arrived_mask is not None:
            ok &= (self.masks & ~arrived_mask) == 0
        return ok

    def schedule(self, index: int, duration: float) -> ActionSchedule:
        entry = self.entries[index]
        return ActionSchedule(duration, self.environment.completions_of(entry.actions), entry.actions)

    def iter_schedules(self, tau: float, arrived_mask: int | None = None) -> Iterator[ActionSchedule]:
        for i in np.flatnonzero(self.feasible(tau, arrived_mask)):
            yield self.schedule(int(i), tau)

    def full_mask(self) -> int:
        return (1 << len(self.jobs)) - 1

    def singleton_min(self) -> float:
        """Earliest completion of any single job."""
        singles = self.size == 1
        return float(self.last[singles].min()) if singles.any() else math.inf


def enumerate_schedules(jobs: Sequence[Job], tau: float, environment,
                        caps: Caps = DEFAULT_CAPS) -> Iterator[ActionSchedule]:
    """Candidate tau-schedules over ``jobs``, padded to duration ``tau``.

    Every job set that can be completed within ``tau`` is represented by its
    cheapest schedules; the empty schedule comes first.
    """
    table = ScheduleTable(jobs, environment, caps)
    yield from table.iter_schedules(tau)
