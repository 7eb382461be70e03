"""Traveling repairperson and dial-a-ride backends (1-resettable).

The executor state is the tuple of server positions; the initial state has
every server at the origin.  A schedule is a list of instantaneous actions at
metric points, each taken as early as the server and the job allow.  Servers
travel along shortest paths at unit speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..core import ABS_TOL, Action, ActionSchedule, InstanceError, Job, leq
from .base import VALID, Caps, Diagnostic, OracleTooLarge, ScheduleTable, invalid
from .metric import MetricSpace


@dataclass(frozen=True)
class TrpPayload:
    location: int


@dataclass(frozen=True)
class DarpPayload:
    source: int
    destination: int


class _RoutingEnvironment:
    gamma = 1.0
    metric: MetricSpace
    servers: int

    def initial_state(self) -> tuple[int, ...]:
        return (self.metric.origin,) * self.servers

    def check_caps(self, jobs: Sequence[Job], caps: Caps) -> None:
        if len(jobs) > caps.max_jobs:
            raise OracleTooLarge(
                f"instance too large for exact oracle: {len(jobs)} jobs > {caps.max_jobs}")
        if self.metric.n_points > caps.max_points:
            raise OracleTooLarge(
                f"instance too large for exact oracle: {self.metric.n_points} points > {caps.max_points}")

    def _check_point(self, job: Job, p: int, what: str) -> None:
        if not (isinstance(p, int) and 0 <= p < self.metric.n_points):
            raise InstanceError(f"job {job.id}: {what} {p} is not a metric point")

    def validate_jobs(self, jobs: Sequence[Job]) -> None:
        pass

    def completions_of(self, actions: Sequence[Action]) -> dict[int, float]:
        return {a.job: a.start for a in actions if a.kind in ("serve", "deliver")}

    def end_positions(self, schedule: ActionSchedule, start_state=None) -> tuple[int, ...]:
        pos = list(start_state or self.initial_state())
        for a in schedule.actions:
            pos[a.unit] = a.where
        return tuple(pos)

    def return_distance(self, schedule: ActionSchedule, start_state=None) -> float:
        """Largest distance from a server to the origin after the schedule."""
        return max(self.metric.d(p, self.metric.origin) for p in self.end_positions(schedule, start_state))

    def reset_duration(self, schedule: ActionSchedule, gamma: float | None = None) -> float:
        g = self.gamma if gamma is None else gamma
        back = self.return_distance(schedule)
        if not leq(back, g * schedule.duration):
            raise InstanceError(f"cannot return to origin ({back}) within {g} * {schedule.duration}")
        return g * schedule.duration


@dataclass(frozen=True)
class TrpEnvironment(_RoutingEnvironment):
    metric: MetricSpace
    servers: int = 1
    name = "trp"

    def __post_init__(self):
        if self.servers < 1:
            raise InstanceError("need at least one server")

    def validate_payload(self, job: Job, jobs: Sequence[Job]) -> None:
        if not isinstance(job.payload, TrpPayload):
            raise InstanceError(f"job {job.id}: expected a TRP payload")
        self._check_point(job, job.payload.location, "location")

    def min_completion(self, jobs: Sequence[Job]) -> float:
        o = self.metric.origin
        return min(max(j.arrival, self.metric.d(o, j.payload.location)) for j in jobs)

    def search(self, jobs: Sequence[Job], table: ScheduleTable, caps: Caps) -> None:
        n, k = len(jobs), self.servers
        D = [list(row) for row in self.metric.distances]
        loc = [j.payload.location for j in jobs]
        arr = [j.arrival for j in jobs]
        w = [j.weight for j in jobs]
        ids = [j.id for j in jobs]
        pos = [self.metric.origin] * k
        clock = [0.0] * k
        used = [False] * k
        actions: list[Action] = []
        tick = table.budget.tick
        add = table.add

        def rec(mask: int, cost: float, now: float) -> None:
            tick()
            fresh_server_tried = False
            for s in range(k):
                if not used[s]:
                    # unused servers are interchangeable
                    if fresh_server_tried:
                        continue
                    fresh_server_tried = True
                p, t0 = pos[s], clock[s]
                row = D[p]
                for r in range(n):
                    if mask >> r & 1:
                        continue
                    t = t0 + row[loc[r]]
                    if t < arr[r]:
                        t = arr[r]
                    if t < now:
                        continue
                    c = cost + w[r] * t
                    m2 = mask | (1 << r)
                    actions.append(Action(t, t, "serve", ids[r], s, loc[r]))
                    add(m2, t, c, actions)
                    saved = (used[s], p, t0)
                    used[s], pos[s], clock[s] = True, loc[r], t
                    rec(m2, c, t)
                    used[s], pos[s], clock[s] = saved
                    actions.pop()

        rec(0, 0.0, 0.0)

    def validate_schedule(self, schedule: ActionSchedule, jobs: Sequence[Job], start_state=None) -> Diagnostic:
        by_id = {j.id: j for j in jobs}
        pos = list(start_state or self.initial_state())
        clock = [0.0] * self.servers
        done: dict[int, float] = {}
        for i, a in enumerate(schedule.actions):
            if a.kind != "serve":
                return invalid("action", f"action {i}: unknown TRP action {a.kind!r}")
            if not 0 <= a.unit < self.servers:
                return invalid("server", f"action {i}: no server {a.unit}")
            job = by_id.get(a.job)
            if job is None:
                return invalid("job", f"action {i}: unknown job {a.job}")
            if a.job in done:
                return invalid("repeat", f"action {i}: job {a.job} served twice")
            if a.where != job.payload.location:
                return invalid("location", f"action {i}: job {a.job} is at {job.payload.location}, not {a.where}")
            reach = clock[a.unit] + self.metric.d(pos[a.unit], a.where)
            if not leq(reach, a.start):
                return invalid("travel", f"action {i}: server {a.unit} cannot reach {a.where} by {a.start}")
            if not leq(job.arrival, a.start):
                return invalid("arrival", f"action {i}: job {a.job} served before its arrival")
            pos[a.unit], clock[a.unit] = a.where, max(clock[a.unit], a.start)
            done[a.job] = a.start
        return _check_claims(schedule, done)


@dataclass(frozen=True)
class DarpEnvironment(_RoutingEnvironment):
    """``capacity=None`` means unbounded."""

    metric: MetricSpace
    servers: int = 1
    capacity: int | None = 1
    preemptive: bool = False
    name = "darp"

    def __post_init__(self):
        if self.servers < 1:
            raise InstanceError("need at least one server")
        if self.capacity is not None and self.capacity < 1:
            raise InstanceError("capacity must be at least 1 (or unbounded)")

    def validate_payload(self, job: Job, jobs: Sequence[Job]) -> None:
        if not isinstance(job.payload, DarpPayload):
            raise InstanceError(f"job {job.id}: expected a DARP payload")
        self._check_point(job, job.payload.source, "source")
        self._check_point(job, job.payload.destination, "destination")

    def min_completion(self, jobs: Sequence[Job]) -> float:
        o, d = self.metric.origin, self.metric.d
        return min(max(j.arrival, d(o, j.payload.source)) + d(j.payload.source, j.payload.destination)
                   for j in jobs)

    def search(self, jobs: Sequence[Job], table: ScheduleTable, caps: Caps) -> None:
        n, k = len(jobs), self.servers
        cap = n if self.capacity is None else self.capacity
        D = [list(row) for row in self.metric.distances]
        src = [j.payload.source for j in jobs]
        dst = [j.payload.destination for j in jobs]
        arr = [j.arrival for j in jobs]
        w = [j.weight for j in jobs]
        ids = [j.id for j in jobs]
        points = range(self.metric.n_points)
        max_drops = caps.max_drops if self.preemptive else 0

        pos = [self.metric.origin] * k
        clock = [0.0] * k
        load = [0] * k
        used = [False] * k
        # per object: 0 untouched, 1 on board, 2 dropped; delivered objects live in mask
        status = [0] * n
        carrier = [-1] * n
        here = list(src)          # current point of an object not on board
        avail = list(arr)         # earliest pickup time at ``here``
        drops = [0] * n
        actions: list[Action] = []
        tick = table.budget.tick
        add = table.add

        def move(s, p, t):
            old = (used[s], pos[s], clock[s])
            used[s], pos[s], clock[s] = True, p, t
            return old

        def rec(mask: int, cost: float, now: float, touched: int) -> None:
            tick()
            fresh_server_tried = False
            for s in range(k):
                if not used[s]:
                    if fresh_server_tried:
                        continue
                    fresh_server_tried = True
                p, t0 = pos[s], clock[s]
                row = D[p]
                for r in range(n):
                    if mask >> r & 1:
                        continue
                    st = status[r]
                    if st == 1:
                        if carrier[r] != s:
                            continue
                        # deliver
                        t = t0 + row[dst[r]]
                        if t >= now:
                            c = cost + w[r] * t
                            m2 = mask | (1 << r)
                            actions.append(Action(t, t, "deliver", ids[r], s, dst[r]))
                            if touched == 1:
                                add(m2, t, c, actions)
                            old = move(s, dst[r], t)
                            status[r] = 3
                            load[s] -= 1
                            rec(m2, c, t, touched - 1)
                            load[s] += 1
                            status[r] = 1
                            used[s], pos[s], clock[s] = old
                            actions.pop()
                        # drop at an intermediate point
                        if drops[r] < max_drops:
                            for v in points:
                                if v == dst[r]:
                                    continue
                                t = t0 + row[v]
                                if t < now:
                                    continue
                                actions.append(Action(t, t, "drop", ids[r], s, v))
                                old = move(s, v, t)
                                status[r], carrier[r] = 2, -1
                                here_old, avail_old = here[r], avail[r]
                                here[r], avail[r] = v, t
                                drops[r] += 1
                                load[s] -= 1
                                rec(mask, cost, t, touched)
                                load[s] += 1
                                drops[r] -= 1
                                here[r], avail[r] = here_old, avail_old
                                status[r], carrier[r] = 1, s
                                used[s], pos[s], clock[s] = old
                                actions.pop()
                    elif load[s] < cap:
                        # pick up, from the source or from a drop point
                        v = here[r]
                        t = t0 + row[v]
                        if t < avail[r]:
                            t = avail[r]
                        if t < now:
                            continue
                        actions.append(Action(t, t, "pickup", ids[r], s, v))
                        old = move(s, v, t)
                        status[r], carrier[r] = 1, s
                        load[s] += 1
                        rec(mask, cost, t, touched + (st == 0))
                        load[s] -= 1
                        status[r], carrier[r] = st, -1
                        used[s], pos[s], clock[s] = old
                        actions.pop()

        rec(0, 0.0, 0.0, 0)

    def validate_schedule(self, schedule: ActionSchedule, jobs: Sequence[Job], start_state=None) -> Diagnostic:
        by_id = {j.id: j for j in jobs}
        cap = math.inf if self.capacity is None else self.capacity
        pos = list(start_state or self.initial_state())
        clock = [0.0] * self.servers
        load = [0] * self.servers
        on_board: dict[int, int] = {}
        dropped: dict[int, tuple[int, float]] = {}
        done: dict[int, float] = {}
        for i, a in enumerate(schedule.actions):
            if a.kind not in ("pickup", "deliver", "drop"):
                return invalid("action", f"action {i}: unknown DARP action {a.kind!r}")
            if not 0 <= a.unit < self.servers:
                return invalid("server", f"action {i}: no server {a.unit}")
            job = by_id.get(a.job)
            if job is None:
                return invalid("job", f"action {i}: unknown job {a.job}")
            if a.job in done:
                return invalid("repeat", f"action {i}: job {a.job} already delivered")
            reach = clock[a.unit] + self.metric.d(pos[a.unit], a.where)
            if not leq(reach, a.start):
                return invalid("travel", f"action {i}: server {a.unit} cannot reach {a.where} by {a.start}")
            if a.kind == "pickup":
                if a.job in on_board:
                    return invalid("pickup", f"action {i}: job {a.job} is already on board")
                if a.job in dropped:
                    v, t = dropped.pop(a.job)
                    if a.where != v or not leq(t, a.start):
                        return invalid("pickup", f"action {i}: job {a.job} is not waiting at {a.where}")
                else:
                    if a.where != job.payload.source:
                        return invalid("pickup", f"action {i}: job {a.job} starts at {job.payload.source}")
                    if not leq(job.arrival, a.start):
                        return invalid("arrival", f"action {i}: job {a.job} picked up before its arrival")
                if load[a.unit] + 1 > cap:
                    return invalid("capacity", f"action {i}: server {a.unit} exceeds capacity {cap}")
                load[a.unit] += 1
                on_board[a.job] = a.unit
            else:
                if on_board.get(a.job) != a.unit:
                    return invalid(a.kind, f"action {i}: job {a.job} is not on server {a.unit}")
                del on_board[a.job]
                load[a.unit] -= 1
                if a.kind == "deliver":
                    if a.where != job.payload.destination:
                        return invalid("deliver", f"action {i}: job {a.job} goes to {job.payload.destination}")
                    done[a.job] = a.start
                else:
                    if not self.preemptive:
                        return invalid("preemption", f"action {i}: drops need a preemptive environment")
                    dropped[a.job] = (a.where, a.start)
            pos[a.unit], clock[a.unit] = a.where, max(clock[a.unit], a.start)
        partial = sorted(set(on_board) | set(dropped))
        if partial:
            return invalid("partial", f"jobs {partial} are left partially executed")
        return _check_claims(schedule, done)


def _check_claims(schedule: ActionSchedule, done: dict[int, float]) -> Diagnostic:
    if set(done) != set(schedule.completions):
        return invalid("claims", f"completes {sorted(done)} but claims {sorted(schedule.completions)}")
    for r, t in done.items():
        if abs(schedule.completions[r] - t) > ABS_TOL * max(1.0, abs(t)):
            return invalid("claims", f"job {r} completes at {t}, claimed {schedule.completions[r]}")
        if not t < schedule.duration:
            return invalid("duration", f"job {r} completes at {t} >= duration {schedule.duration}")
    return VALID
