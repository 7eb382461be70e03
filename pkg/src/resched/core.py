"""Problem-agnostic data model for resettable scheduling.

Times and weights are plain floats.  Job ids are dense integers assigned by
input order, which also serves as the tie-break order everywhere else.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple

TOL = float(os.environ.get("RESCHED_TOL", "1e-9"))
ABS_TOL = TOL
REL_TOL = TOL
# band inside which two schedule values count as equal for tie-breaking; only
# needs to absorb summation-order noise, so it is much tighter than TOL
TIE_TOL = 1e-12


class ReschedError(Exception):
    """Base class for all library errors."""


class InstanceError(ReschedError, ValueError):
    pass


class UnknownJobError(ReschedError, KeyError):
    pass


class ScheduleError(ReschedError, ValueError):
    pass


def close(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


def leq(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    """``a <= b`` up to the library tolerance."""
    return a <= b or close(a, b, rel, abs_)


@dataclass(frozen=True)
class Job:
    id: int
    arrival: float
    weight: float
    payload: Any

    def __post_init__(self):
        if not self.weight > 0:
            raise InstanceError(f"job {self.id}: weight must be positive, got {self.weight}")
        if not self.arrival >= 0:
            raise InstanceError(f"job {self.id}: arrival must be non-negative, got {self.arrival}")


@dataclass(frozen=True)
class Instance:
    """Jobs plus the environment executing them.

    ``gamma`` defaults to the environment's natural reset factor; a larger
    value is allowed (the reset is then padded).
    """

    jobs: tuple[Job, ...]
    environment: Any
    gamma: float | None = None

    def __post_init__(self):
        jobs = tuple(self.jobs)
        object.__setattr__(self, "jobs", jobs)
        for i, job in enumerate(jobs):
            if job.id != i:
                raise InstanceError(f"job ids must be dense by input order; position {i} has id {job.id}")
            self.environment.validate_payload(job, jobs)
        self.environment.validate_jobs(jobs)
        natural = self.environment.gamma
        if self.gamma is None:
            object.__setattr__(self, "gamma", float(natural))
        elif self.gamma < natural - ABS_TOL:
            raise InstanceError(
                f"gamma={self.gamma} is below the environment reset factor {natural}")
        if jobs and not self.environment.min_completion(jobs) > 0:
            raise InstanceError("earliest possible completion min(I) must be strictly positive")

    @property
    def problem(self) -> str:
        return self.environment.name

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(range(len(self.jobs)))

    def job(self, job_id: int) -> Job:
        if not (isinstance(job_id, int) and 0 <= job_id < len(self.jobs)):
            raise UnknownJobError(job_id)
        return self.jobs[job_id]

    def arrived(self, tau: float) -> frozenset[int]:
        """Ids of jobs with arrival <= tau."""
        return frozenset(j.id for j in self.jobs if j.arrival <= tau)

    def min_completion(self) -> float:
        if not self.jobs:
            raise InstanceError("min(I) is undefined for an empty instance")
        return self.environment.min_completion(self.jobs)


class Action(NamedTuple):
    """One timed step of a schedule.

    Routing actions (``serve``, ``pickup``, ``deliver``, ``drop``) are
    instantaneous: ``start == end`` and ``where`` is a metric point.  Machine
    actions (``run``) occupy ``[start, end)`` on machine ``unit``.
    """

    start: float
    end: float
    kind: str
    job: int
    unit: int
    where: int = -1


@dataclass(frozen=True)
class ActionSchedule:
    """An auxiliary schedule of a fixed duration, started from the initial state."""

    duration: float
    completions: Mapping[int, float] = field(default_factory=dict)
    actions: tuple[Action, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "completions", dict(self.completions))
        object.__setattr__(self, "actions", tuple(self.actions))
        for job_id, offset in self.completions.items():
            if not 0 <= offset < self.duration:
                raise ScheduleError(
                    f"job {job_id} completes at offset {offset} outside [0, {self.duration})")

    @property
    def completed(self) -> frozenset[int]:
        return frozenset(self.completions)

    def padded(self, duration: float) -> "ActionSchedule":
        """Same actions, idling until ``duration``."""
        return ActionSchedule(duration, self.completions, self.actions)

    def to_dict(self) -> dict:
        return {
            "duration": self.duration,
            "completions": {str(k): v for k, v in sorted(self.completions.items())},
            "actions": [a._asdict() for a in self.actions],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ActionSchedule":
        return cls(
            float(data["duration"]),
            {int(k): float(v) for k, v in data.get("completions", {}).items()},
            tuple(Action(**a) for a in data.get("actions", [])),
        )


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    per_job: Mapping[int, float]

    @classmethod
    def from_completions(cls, completions: Mapping[int, float], instance: Instance) -> "CostBreakdown":
        per_job = {r: instance.job(r).weight * t for r, t in sorted(completions.items())}
        return cls(math.fsum(per_job.values()), per_job)


def weight_of(ids: Iterable[int], instance: Instance) -> float:
    return math.fsum(instance.job(r).weight for r in ids)


def schedule_cost(schedule: ActionSchedule, subset: Iterable[int], instance: Instance) -> float:
    """Weighted completion cost of ``subset`` inside ``schedule``."""
    total = []
    for r in subset:
        if r not in schedule.completions:
            raise ScheduleError(f"job {r} is not completed by the schedule")
        total.append(instance.job(r).weight * schedule.completions[r])
    return math.fsum(total)


def val(schedule: ActionSchedule, tau: float, arrived: Iterable[int], instance: Instance) -> float:
    """Cost of completed jobs plus ``tau`` per unit weight of arrived, uncompleted jobs."""
    if not close(schedule.duration, tau):
        raise ScheduleError(f"schedule duration {schedule.duration} != tau {tau}")
    arrived = frozenset(arrived)
    done = schedule.completed
    if not done <= arrived:
        raise ScheduleError(f"schedule completes jobs {sorted(done - arrived)} outside the arrived set")
    return schedule_cost(schedule, done, instance) + tau * weight_of(arrived - done, instance)
