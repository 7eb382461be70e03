"""Concrete problem backends and the instance JSON format.

Instance files look like::

    {"problem": "trp", "gamma": 1.0,
     "environment": {"metric": {"line": [0, 1, 2]}, "servers": 1},
     "jobs": [{"arrival": 1, "weight": 1, "payload": {"location": 1}}]}

``darp`` environments add ``capacity`` (``null`` = unbounded) and
``preemptive``; ``machines`` environments are ``{"machines": m,
"preemptive": false}`` with payloads ``{"exec_times": [...],
"predecessors": [...]}`` where ``null`` marks a machine that cannot run the job.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..core import Instance, InstanceError, Job
from .base import DEFAULT_CAPS, Caps, Diagnostic, OracleTooLarge, ScheduleTable, enumerate_schedules
from .machines import MachinePayload, MachinesEnvironment
from .metric import MetricSpace, floyd_warshall
from .routing import DarpEnvironment, DarpPayload, TrpEnvironment, TrpPayload

__all__ = [
    "Caps", "DEFAULT_CAPS", "Diagnostic", "OracleTooLarge", "ScheduleTable", "enumerate_schedules",
    "MachinePayload", "MachinesEnvironment", "MetricSpace", "floyd_warshall",
    "DarpEnvironment", "DarpPayload", "TrpEnvironment", "TrpPayload",
    "validate_schedule", "reset_duration", "min_completion",
    "instance_from_dict", "instance_to_dict", "load_instance", "save_instance",
]


def validate_schedule(schedule, instance: Instance, start_state=None) -> Diagnostic:
    return instance.environment.validate_schedule(schedule, instance.jobs, start_state)


def reset_duration(schedule, instance: Instance) -> float:
    return instance.environment.reset_duration(schedule, instance.gamma)


def min_completion(instance: Instance) -> float:
    return instance.min_completion()


def _environment_from_dict(problem: str, env: dict):
    if problem == "trp":
        return TrpEnvironment(MetricSpace.from_dict(env["metric"]), int(env.get("servers", 1)))
    if problem == "darp":
        cap = env.get("capacity", 1)
        return DarpEnvironment(MetricSpace.from_dict(env["metric"]), int(env.get("servers", 1)),
                               None if cap is None else int(cap), bool(env.get("preemptive", False)))
    if problem == "machines":
        return MachinesEnvironment(int(env["machines"]), bool(env.get("preemptive", False)))
    raise InstanceError(f"unknown problem {problem!r} (expected trp, darp or machines)")


def _payload_from_dict(problem: str, p: dict):
    if problem == "trp":
        return TrpPayload(int(p["location"]))
    if problem == "darp":
        return DarpPayload(int(p["source"]), int(p["destination"]))
    times = tuple(math.inf if x is None else float(x) for x in p["exec_times"])
    return MachinePayload(times, frozenset(int(x) for x in p.get("predecessors", [])))


def instance_from_dict(data: dict) -> Instance:
    try:
        problem = data["problem"]
        env = _environment_from_dict(problem, data.get("environment", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"environment: {exc!r}") from exc
    jobs = []
    for i, item in enumerate(data.get("jobs", [])):
        try:
            payload = _payload_from_dict(problem, item["payload"])
            jobs.append(Job(i, float(item["arrival"]), float(item.get("weight", 1.0)), payload))
        except InstanceError as exc:
            raise InstanceError(f"jobs[{i}]: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"jobs[{i}]: bad field {exc!r}") from exc
    if not jobs:
        raise InstanceError("instance has no jobs")
    gamma = data.get("gamma")
    return Instance(tuple(jobs), env, None if gamma is None else float(gamma))


def _environment_to_dict(env) -> dict:
    if isinstance(env, MachinesEnvironment):
        return {"machines": env.machines, "preemptive": env.preemptive}
    out = {"metric": env.metric.to_dict(), "servers": env.servers}
    if isinstance(env, DarpEnvironment):
        out["capacity"] = env.capacity
        out["preemptive"] = env.preemptive
    return out


def _payload_to_dict(p) -> dict:
    if isinstance(p, TrpPayload):
        return {"location": p.location}
    if isinstance(p, DarpPayload):
        return {"source": p.source, "destination": p.destination}
    return {"exec_times": [None if math.isinf(x) else x for x in p.exec_times],
            "predecessors": sorted(p.predecessors)}


def instance_to_dict(instance: Instance) -> dict:
    return {
        "problem": instance.problem,
        "gamma": instance.gamma,
        "environment": _environment_to_dict(instance.environment),
        "jobs": [{"arrival": j.arrival, "weight": j.weight, "payload": _payload_to_dict(j.payload)}
                 for j in instance.jobs],
    }


def load_instance(path) -> Instance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return instance_from_dict(data)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")
