"""Phase-based online algorithms and their per-phase bookkeeping.

``run_mimic`` waits until ``tau_1``; at every phase end ``tau_k`` it computes
the penalty-minimizing schedule for the jobs seen so far, replays it during
``[tau_k, 2 tau_k)`` serving only jobs not served before, then spends
``gamma * tau_k`` returning the executor to its initial state.  ``run_disc``
averages MIMIC over a discrete set of phase offsets and
``randomized_expected_cost`` over a continuous one.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .core import ABS_TOL, ActionSchedule, CostBreakdown, Instance, ReschedError
from .oracle import get_oracle


class ConvergenceError(ReschedError):
    """The piecewise integration over omega could not resolve its breakpoints."""


class TraceError(ReschedError):
    """Internal inconsistency while extracting per-phase quantities."""


@dataclass(frozen=True)
class PhaseGrid:
    """Sub-phase boundaries for DISC(gamma, M, beta).

    ``eta(q) = min_I * alpha**(beta - 1) * delta**q`` with ``delta**M = alpha``.
    The exponent is assembled exactly like the phase offsets of
    :func:`run_disc`, so ``eta(m + k*M)`` equals that run's ``tau_k`` bit for bit.
    """

    gamma: float
    M: int
    beta: float
    min_I: float

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not 0 < self.beta <= 1 / self.M + 1e-12:
            raise ValueError(f"beta must lie in (0, 1/M], got {self.beta}")
        if not self.min_I > 0:
            raise ValueError("min_I must be positive")

    @property
    def alpha(self) -> float:
        return 2.0 + self.gamma

    @property
    def delta(self) -> float:
        return self.alpha ** (1.0 / self.M)

    def omega(self, m: int) -> float:
        return -1 + m / self.M + self.beta

    def eta(self, q: int) -> float:
        return self.min_I * self.alpha ** (q // self.M + (-1 + (q % self.M) / self.M + self.beta))

    def etas(self, Q: int) -> np.ndarray:
        """``eta(-1), eta(0), ..., eta(Q)``."""
        return np.array([self.eta(q) for q in range(-1, Q + 1)])

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "M": self.M, "beta": self.beta, "min_I": self.min_I}


@dataclass(frozen=True)
class Phase:
    k: int
    tau: float
    schedule: ActionSchedule
    fresh: dict[int, float]     # job -> online completion time

    def to_dict(self) -> dict:
        return {"k": self.k, "tau": self.tau, "schedule": self.schedule.to_dict(),
                "fresh": {str(r): t for r, t in sorted(self.fresh.items())}}


@dataclass(frozen=True)
class RunTrace:
    omega: float
    gamma: float
    min_I: float
    phases: tuple[Phase, ...]
    completions: dict[int, float]
    cost: CostBreakdown

    @property
    def alpha(self) -> float:
        return 2.0 + self.gamma

    def signature(self) -> tuple:
        """Per job: phase that served it and its offset inside that phase's schedule."""
        out = []
        for ph in self.phases:
            for r in sorted(ph.fresh):
                out.append((r, ph.k, ph.schedule.completions[r]))
        return tuple(sorted(out))

    def to_dict(self) -> dict:
        return {"omega": self.omega, "gamma": self.gamma, "min_I": self.min_I,
                "cost": self.cost.total,
                "completions": {str(r): t for r, t in sorted(self.completions.items())},
                "phases": [p.to_dict() for p in self.phases]}


def run_mimic(instance: Instance, omega: float, max_phases: int = 200) -> RunTrace:
    if not -1 < omega <= 1e-12:
        raise ValueError(f"omega must lie in (-1, 0], got {omega}")
    oracle = get_oracle(instance)
    alpha = 2.0 + instance.gamma
    min_I = instance.min_completion()
    n = len(instance.jobs)
    # phase 1 computes nothing; keep its dummy schedule for uniform bookkeeping
    phases = [Phase(0, min_I * alpha ** (0 + omega), ActionSchedule(min_I * alpha ** (0 + omega)), {})]
    served: dict[int, float] = {}
    k = 0
    while len(served) < n:
        k += 1
        if k > max_phases:
            raise ReschedError(f"MIMIC did not finish within {max_phases} phases")
        tau = min_I * alpha ** (k + omega)
        res = oracle.best_tau_schedule(tau)
        fresh = {r: tau + c for r, c in res.schedule.completions.items() if r not in served}
        served.update(fresh)
        phases.append(Phase(k, tau, res.schedule, fresh))
    return RunTrace(omega, instance.gamma, min_I, tuple(phases), dict(served),
                    CostBreakdown.from_completions(served, instance))


@dataclass(frozen=True)
class DiscResult:
    grid: PhaseGrid
    traces: tuple[RunTrace, ...]
    expected_cost: float

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "expected_cost": self.expected_cost,
                "traces": [t.to_dict() for t in self.traces]}


def run_disc(instance: Instance, M: int, beta: float) -> DiscResult:
    grid = PhaseGrid(instance.gamma, M, beta, instance.min_completion())
    traces = tuple(run_mimic(instance, grid.omega(m)) for m in range(M))
    return DiscResult(grid, traces, math.fsum(t.cost.total for t in traces) / M)


def disc_bound(gamma: float, M: int) -> float:
    """Ratio guaranteed for DISC(gamma, M, beta): 1 + (1/M) sum_j (2+gamma)^(j/M)."""
    return 1 + math.fsum((2 + gamma) ** (j / M) for j in range(1, M + 1)) / M


def randomized_bound(gamma: float) -> float:
    return 1 + (1 + gamma) / math.log(2 + gamma)


# -- expectation over a uniform omega --------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def integrate_piecewise(f, sig, a: float, b: float, n_samples: int,
                        resolution: float = 1e-13, max_pieces: int = 20000):
    """Integral of ``f`` over ``[a, b]`` where ``f`` is smooth between changes of ``sig``.

    Breakpoints are located by bisection between probes with different
    signatures; each piece is integrated by Gauss-Legendre after checking
    that the signature is constant on its nodes (else those nodes become
    probes and the piece is rescanned).  Returns ``(integral, pieces)``.
    """
    cache: dict[float, tuple] = {}

    def s(x):
        if x not in cache:
            cache[x] = sig(x)
        return cache[x]

    def scan(probes):
        # probes[0] is the piece start; returns [(lo, hi, signature)]
        out = []
        lo, slo = probes[0], s(probes[0])
        for hi in probes[1:]:
            while s(hi) != slo:
                x0, x1 = lo, hi
                while x1 - x0 > resolution:
                    mid = 0.5 * (x0 + x1)
                    if s(mid) == slo:
                        x0 = mid
                    else:
                        x1 = mid
                out.append((lo, x1, slo))
                if len(out) > max_pieces:
                    raise ConvergenceError(f"more than {max_pieces} signature changes in [{probes[0]}, {hi}]")
                lo, slo = x1, s(x1)
        out.append((lo, probes[-1], slo))
        return out

    xs = [a + (b - a) * i / n_samples for i in range(n_samples + 1)]
    # the left end may lie outside the domain; probe just inside it
    todo = scan([a + resolution] + xs[1:])
    todo[0] = (a, todo[0][1], todo[0][2])
    total, pieces = [], []
    rescans = 0
    while todo:
        lo, hi, want = todo.pop()
        if hi <= lo:
            continue
        nodes = [float(x) for x in 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)]
        if all(s(x) == want for x in nodes):
            vals = np.array([f(x) for x in nodes])
            total.append(0.5 * (hi - lo) * float(_GL_WEIGHTS @ vals))
            pieces.append((lo, hi))
            continue
        rescans += 1
        if rescans > max_pieces or len(pieces) + len(todo) > max_pieces:
            raise ConvergenceError(f"could not resolve signature changes inside [{lo}, {hi}]")
        start = lo + resolution if lo == a else lo
        sub = scan([start] + nodes + [hi])
        sub[0] = (lo, sub[0][1], sub[0][2])
        todo.extend(sub)
    pieces.sort()
    return math.fsum(total), pieces


def randomized_expected_cost(instance: Instance, quadrature_points: int = 32) -> float:
    """E[cost of MIMIC(gamma, omega)] for omega uniform on (-1, 0]."""
    if quadrature_points < 16:
        raise ValueError("quadrature_points must be >= 16")
    runs: dict[float, RunTrace] = {}

    def run(x):
        if x not in runs:
            runs[x] = run_mimic(instance, min(x, 0.0))
        return runs[x]

    value, _ = integrate_piecewise(lambda x: run(x).cost.total, lambda x: run(x).signature(),
                                   -1.0, 0.0, quadrature_points)
    return value


# -- fresh / stale bookkeeping --------------------------------------------

@dataclass
class FreshStalePartition:
    """Per schedule ``A_q`` and sub-phase ``j``: weights and weighted offsets of fresh and stale jobs.

    Arrays are indexed ``[q, j]`` and vanish for ``j > q``; ``etas[i]`` is
    ``eta(i - 1)``.
    """

    M: int
    K: int
    etas: np.ndarray
    wF: np.ndarray
    wS: np.ndarray
    gF: np.ndarray
    gS: np.ndarray
    opt_cost: float
    completed: list[frozenset] = field(default_factory=list)
    fresh: list[frozenset] = field(default_factory=list)

    @property
    def Q(self) -> int:
        return self.K * self.M + self.M - 1

    @property
    def w(self) -> np.ndarray:
        return self.wF + self.wS

    @property
    def g(self) -> np.ndarray:
        return self.gF + self.gS

    def eta(self, q: int) -> float:
        return float(self.etas[q + 1])

    def previous(self, q: int) -> range:
        return range(q % self.M, q - self.M + 1, self.M)

    def disc_cost(self) -> float:
        """Expected DISC cost assembled from fresh quantities."""
        terms = []
        for q in range(self.Q + 1):
            for j in range(q + 1):
                terms.append(self.eta(q) * self.wF[q, j])
                terms.append(self.gF[q, j])
        return math.fsum(terms) / self.M

    def to_dict(self) -> dict:
        tri = lambda a: [a[q, : q + 1].tolist() for q in range(self.Q + 1)]
        return {"M": self.M, "K": self.K, "Q": self.Q, "etas": self.etas.tolist(),
                "opt_cost": self.opt_cost, "wF": tri(self.wF), "wS": tri(self.wS),
                "gF": tri(self.gF), "gS": tri(self.gS),
                "completed": [sorted(s) for s in self.completed],
                "fresh": [sorted(s) for s in self.fresh]}


def extract_partition(instance: Instance, grid: PhaseGrid, K: int | None = None,
                      traces=None) -> FreshStalePartition:
    """Split every ``A_q = S_eta(q)`` (``q <= Q``) into fresh and stale jobs per sub-phase.

    Rows ``q < M`` are the empty dummy schedules.  When ``traces`` (one per
    ``m``, as from :func:`run_disc`) are given, the schedules they executed
    must coincide with the recomputed ones.
    """
    oracle = get_oracle(instance)
    if K is None:
        K = oracle.detect_completion_phase(grid)
    if K < 1:
        raise ValueError("K must be >= 1")
    M = grid.M
    Q = K * M + M - 1
    etas = grid.etas(Q)
    edges = etas.tolist()
    wF, wS, gF, gS = (np.zeros((Q + 1, Q + 1)) for _ in range(4))
    completed: list[frozenset] = []
    fresh_sets: list[frozenset] = []
    seen = [set() for _ in range(M)]
    executed = {}
    if traces is not None:
        for m, tr in enumerate(traces):
            for ph in tr.phases[1:]:
                executed[m + ph.k * M] = ph.schedule
    for q in range(Q + 1):
        if q < M:
            comps = {}
        else:
            comps = dict(oracle.best_tau_schedule(grid.eta(q)).schedule.completions)
            if q in executed and executed[q].completions != comps:
                raise TraceError(f"schedule executed for q={q} differs from S_eta(q)")
        old = seen[q % M]
        fresh = frozenset(r for r in comps if r not in old)
        for r, c in comps.items():
            j = bisect_right(edges, c) - 1
            if not (0 <= j <= q) or not edges[j] <= c < edges[j + 1]:
                raise TraceError(f"offset {c} of job {r} in A_{q} lies outside [eta(-1), eta({q}))")
            wt = instance.jobs[r].weight
            if r in fresh:
                wF[q, j] += wt
                gF[q, j] += wt * c
            else:
                wS[q, j] += wt
                gS[q, j] += wt * c
        old.update(comps)
        completed.append(frozenset(comps))
        fresh_sets.append(fresh)
    return FreshStalePartition(M, K, etas, wF, wS, gF, gS, oracle.opt_cost(), completed, fresh_sets)


def dump_trace(path, disc: DiscResult, partition: FreshStalePartition | None = None) -> None:
    data = disc.to_dict()
    if partition is not None:
        data["partition"] = partition.to_dict()
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def check_online_identity(disc: DiscResult, partition: FreshStalePartition) -> float:
    """Relative gap between the simulated expected cost and the fresh-weight formula."""
    a, b = disc.expected_cost, partition.disc_cost()
    return abs(a - b) / max(abs(a), ABS_TOL)


__all__ = [
    "ConvergenceError", "DiscResult", "FreshStalePartition", "Phase", "PhaseGrid", "RunTrace",
    "TraceError", "check_online_identity", "disc_bound", "dump_trace", "extract_partition",
    "integrate_piecewise", "randomized_bound", "randomized_expected_cost", "run_disc", "run_mimic",
]
