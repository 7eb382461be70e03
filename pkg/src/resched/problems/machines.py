"""Unrelated machines with release dates and precedence constraints (0-resettable).

A job may run on any machine with a finite execution time.  Preemption, when
enabled, never migrates a job: all its pieces run on one machine.  A job of a
schedule may start only after its predecessors are completed by that same
schedule, so schedules do not depend on what ran before them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

from ..core import ABS_TOL, Action, ActionSchedule, InstanceError, Job, close, leq
from .base import Caps, Diagnostic, OracleTooLarge, ScheduleTable, invalid
from .routing import _check_claims


@dataclass(frozen=True)
class MachinePayload:
    exec_times: tuple[float, ...]
    predecessors: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "exec_times", tuple(float(x) for x in self.exec_times))
        object.__setattr__(self, "predecessors", frozenset(self.predecessors))


@dataclass(frozen=True)
class MachinesEnvironment:
    machines: int
    preemptive: bool = False
    name = "machines"
    gamma = 0.0

    def __post_init__(self):
        if self.machines < 1:
            raise InstanceError("need at least one machine")

    def initial_state(self):
        return None

    def check_caps(self, jobs: Sequence[Job], caps: Caps) -> None:
        if len(jobs) > caps.max_jobs:
            raise OracleTooLarge(f"instance too large for exact oracle: {len(jobs)} jobs > {caps.max_jobs}")
        if self.machines > caps.max_machines:
            raise OracleTooLarge(
                f"instance too large for exact oracle: {self.machines} machines > {caps.max_machines}")

    def validate_payload(self, job: Job, jobs: Sequence[Job]) -> None:
        p = job.payload
        if not isinstance(p, MachinePayload):
            raise InstanceError(f"job {job.id}: expected a machine payload")
        if len(p.exec_times) != self.machines:
            raise InstanceError(f"job {job.id}: needs {self.machines} execution times, got {len(p.exec_times)}")
        if not all(x > 0 for x in p.exec_times) or not any(math.isfinite(x) for x in p.exec_times):
            raise InstanceError(f"job {job.id}: execution times must be positive, at least one finite")
        ids = {j.id for j in jobs}
        if not p.predecessors <= ids or job.id in p.predecessors:
            raise InstanceError(f"job {job.id}: bad predecessor set {sorted(p.predecessors)}")

    def validate_jobs(self, jobs: Sequence[Job]) -> None:
        preds = {j.id: j.payload.predecessors for j in jobs}
        state: dict[int, int] = {}

        def visit(r: int) -> None:
            state[r] = 1
            for p in preds[r]:
                if state.get(p) == 1:
                    raise InstanceError(f"precedence cycle through jobs {p} and {r}")
                if p not in state:
                    visit(p)
            state[r] = 2

        for r in preds:
            if r not in state:
                visit(r)

    def min_completion(self, jobs: Sequence[Job]) -> float:
        # some job without predecessors finishes first; running it alone is feasible
        return min(j.arrival + min(j.payload.exec_times) for j in jobs if not j.payload.predecessors)

    def completions_of(self, actions: Sequence[Action]) -> dict[int, float]:
        out: dict[int, float] = {}
        for a in actions:
            out[a.job] = max(out.get(a.job, 0.0), a.end)
        return out

    def reset_duration(self, schedule: ActionSchedule, gamma: float | None = None) -> float:
        return (self.gamma if gamma is None else gamma) * schedule.duration

    def search(self, jobs: Sequence[Job], table: ScheduleTable, caps: Caps) -> None:
        if self.preemptive:
            self._search_preemptive(jobs, table)
        else:
            self._search_sequential(jobs, table)

    def _search_sequential(self, jobs: Sequence[Job], table: ScheduleTable) -> None:
        # starts in non-decreasing order reach every semi-active schedule
        n, m = len(jobs), self.machines
        index = {j.id: i for i, j in enumerate(jobs)}
        pmask = []
        for j in jobs:
            if not j.payload.predecessors <= index.keys():
                raise InstanceError(f"job {j.id}: predecessors missing from the job set")
            pmask.append(sum(1 << index[p] for p in j.payload.predecessors))
        preds = [[index[p] for p in j.payload.predecessors] for j in jobs]
        arr = [j.arrival for j in jobs]
        w = [j.weight for j in jobs]
        ptime = [j.payload.exec_times for j in jobs]
        ids = [j.id for j in jobs]
        free = [0.0] * m
        comp = [0.0] * n
        actions: list[Action] = []
        tick = table.budget.tick
        add = table.add

        def rec(mask: int, cost: float, now: float, last: float) -> None:
            tick()
            for r in range(n):
                if mask >> r & 1 or pmask[r] & ~mask:
                    continue
                ready = arr[r]
                for p in preds[r]:
                    if comp[p] > ready:
                        ready = comp[p]
                for i in range(m):
                    if not math.isfinite(ptime[r][i]):
                        continue
                    s = free[i] if free[i] > ready else ready
                    if s < now:
                        continue
                    c = s + ptime[r][i]
                    m2 = mask | (1 << r)
                    cost2 = cost + w[r] * c
                    last2 = c if c > last else last
                    actions.append(Action(s, c, "run", ids[r], i))
                    add(m2, last2, cost2, actions)
                    old = free[i]
                    free[i], comp[r] = c, c
                    rec(m2, cost2, s, last2)
                    free[i] = old
                    actions.pop()

        rec(0, 0.0, 0.0, 0.0)

    def _search_preemptive(self, jobs: Sequence[Job], table: ScheduleTable) -> None:
        # decisions only at arrivals and completions; a job keeps its first machine
        n, m = len(jobs), self.machines
        index = {j.id: i for i, j in enumerate(jobs)}
        pmask = [sum(1 << index[p] for p in j.payload.predecessors) for j in jobs]
        arr = [j.arrival for j in jobs]
        w = [j.weight for j in jobs]
        ptime = [j.payload.exec_times for j in jobs]
        ids = [j.id for j in jobs]
        arrivals = sorted(set(arr))
        tick = table.budget.tick
        add = table.add
        seen: dict[tuple, float] = {}

        def rec(t, mask, cost, remaining, home, segments, last):
            tick()
            key = (t, mask, remaining, home)
            best = seen.get(key)
            if best is not None and best <= cost:
                return
            seen[key] = cost
            ready = [r for r in range(n)
                     if not mask >> r & 1 and arr[r] <= t and not pmask[r] & ~mask]
            choices = []
            for i in range(m):
                opts = [None]
                for r in ready:
                    if (home[r] in (-1, i)) and math.isfinite(ptime[r][i]):
                        opts.append(r)
                choices.append(opts)
            future = [a for a in arrivals if a > t]
            nxt_arrival = future[0] if future else math.inf
            for pick in product(*choices):
                running = [(i, r) for i, r in enumerate(pick) if r is not None]
                if len({r for _, r in running}) < len(running):
                    continue
                t2 = nxt_arrival
                for i, r in running:
                    left = remaining[r] if remaining[r] >= 0 else ptime[r][i]
                    t2 = min(t2, t + left)
                if not math.isfinite(t2):
                    continue
                rem = list(remaining)
                hm = list(home)
                mask2, cost2, last2 = mask, cost, last
                segs = list(segments)
                for i, r in running:
                    left = rem[r] if rem[r] >= 0 else ptime[r][i]
                    left -= t2 - t
                    hm[r] = i
                    segs.append(Action(t, t2, "run", ids[r], i))
                    if left <= ABS_TOL * max(1.0, t2):
                        rem[r] = 0.0
                        mask2 |= 1 << r
                        cost2 += w[r] * t2
                        last2 = t2
                    else:
                        rem[r] = left
                clean = all(rem[r] < 0 for r in range(n) if not mask2 >> r & 1)
                if mask2 != mask and clean:
                    add(mask2, last2, cost2, segs)
                rec(t2, mask2, cost2, tuple(rem), tuple(hm), tuple(segs), last2)

        rec(0.0, 0, 0.0, (-1.0,) * n, (-1,) * n, (), 0.0)

    def validate_schedule(self, schedule: ActionSchedule, jobs: Sequence[Job], start_state=None) -> Diagnostic:
        by_id = {j.id: j for j in jobs}
        pieces: dict[int, list[Action]] = {}
        per_machine: dict[int, list[Action]] = {}
        for i, a in enumerate(schedule.actions):
            if a.kind != "run":
                return invalid("action", f"action {i}: unknown machine action {a.kind!r}")
            if a.job not in by_id:
                return invalid("job", f"action {i}: unknown job {a.job}")
            if not 0 <= a.unit < self.machines:
                return invalid("machine", f"action {i}: no machine {a.unit}")
            if not a.end > a.start:
                return invalid("segment", f"action {i}: empty or reversed interval")
            pieces.setdefault(a.job, []).append(a)
            per_machine.setdefault(a.unit, []).append(a)
        for unit, segs in per_machine.items():
            segs = sorted(segs)
            for x, y in zip(segs, segs[1:]):
                if not leq(x.end, y.start):
                    return invalid("overlap", f"machine {unit}: jobs {x.job} and {y.job} overlap")
        done: dict[int, float] = {}
        for r, segs in pieces.items():
            job = by_id[r]
            units = {a.unit for a in segs}
            if len(units) > 1:
                return invalid("migration", f"job {r} runs on several machines")
            if not self.preemptive and len(segs) > 1:
                return invalid("preemption", f"job {r} is split in a non-preemptive environment")
            unit = units.pop()
            work = math.fsum(a.end - a.start for a in segs)
            need = job.payload.exec_times[unit]
            if not close(work, need):
                return invalid("partial", f"job {r} gets {work} of {need} time units")
            start = min(a.start for a in segs)
            if not leq(job.arrival, start):
                return invalid("arrival", f"job {r} starts before its arrival")
            done[r] = max(a.end for a in segs)
        for r, segs in pieces.items():
            start = min(a.start for a in segs)
            for p in by_id[r].payload.predecessors:
                if p not in done:
                    return invalid("precedence", f"job {r} runs but predecessor {p} is not completed")
                if not leq(done[p], start):
                    return invalid("precedence", f"job {r} starts before predecessor {p} completes")
        return _check_claims(schedule, done)
