"""Instance generators, lower-bound constructions and report writers.

Fuzz instances are drawn from ``numpy.random.default_rng([seed, index])`` so
that instance ``i`` does not depend on how many others were generated.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Instance, Job
from .mimic import randomized_bound, randomized_expected_cost, run_mimic
from .oracle import get_oracle
from .problems import (DarpEnvironment, DarpPayload, MachinePayload, MachinesEnvironment, MetricSpace,
                       TrpEnvironment, TrpPayload)

PROBLEMS = ("trp", "darp", "machines")
FAMILY_GAMMA = {"trp": 1.0, "darp": 1.0, "machines": 0.0}
DISC_CONFIGS = tuple((M, beta) for M in (1, 2, 3) for beta in (1 / (2 * M), 1 / M))


# -- random instances ------------------------------------------------------

def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def random_metric(rng, n_points: int) -> MetricSpace:
    """Random connected graph (spanning tree plus extra edges), closed under shortest paths."""
    edges = []
    for v in range(1, n_points):
        edges.append((int(rng.integers(v)), v, round(float(_log_uniform(rng, 0.2, 8.0)), 3)))
    for u in range(n_points):
        for v in range(u + 1, n_points):
            if rng.random() < 0.3:
                edges.append((u, v, round(float(_log_uniform(rng, 0.2, 8.0)), 3)))
    return MetricSpace.from_edges(n_points, edges)


def _arrivals(rng, n):
    a = np.round(_log_uniform(rng, 0.05, 20.0, n), 3)
    a[rng.random(n) < 0.2] = 0.0
    return a


def _weights(rng, n):
    return np.round(_log_uniform(rng, 0.1, 10.0, n), 3)


def _variant(rng, table):
    r, acc = rng.random(), 0.0
    for p, v in table:
        acc += p
        if r < acc:
            return v
    return table[-1][1]


def random_trp(rng, max_jobs=6) -> Instance:
    servers, cap = _variant(rng, [(0.8, (1, 6)), (0.2, (2, 5))])
    n = int(rng.integers(1, min(cap, max_jobs) + 1))
    metric = random_metric(rng, int(rng.integers(2, 6)))
    arr, wts = _arrivals(rng, n), _weights(rng, n)
    jobs = [Job(i, float(arr[i]), float(wts[i]), TrpPayload(int(rng.integers(1, metric.n_points))))
            for i in range(n)]
    return Instance(tuple(jobs), TrpEnvironment(metric, servers))


def random_darp(rng, max_jobs=6) -> Instance:
    servers, capacity, preemptive, cap = _variant(rng, [
        (0.5, (1, 1, False, 6)), (0.15, (1, 2, False, 5)), (0.15, (1, None, False, 4)),
        (0.1, (2, 1, False, 4)), (0.1, (1, 1, True, 3))])
    n = int(rng.integers(1, min(cap, max_jobs) + 1))
    metric = random_metric(rng, int(rng.integers(2, 6)))
    arr, wts = _arrivals(rng, n), _weights(rng, n)
    jobs = []
    for i in range(n):
        src = int(rng.integers(metric.n_points))
        dst = int(rng.integers(metric.n_points - 1))
        dst += dst >= src
        jobs.append(Job(i, float(arr[i]), float(wts[i]), DarpPayload(src, dst)))
    return Instance(tuple(jobs), DarpEnvironment(metric, servers, capacity, preemptive))


def random_machines(rng, max_jobs=6) -> Instance:
    machines, preemptive, cap = _variant(rng, [(0.85, (int(rng.integers(1, 4)), False, 6)),
                                               (0.15, (int(rng.integers(1, 3)), True, 4))])
    n = int(rng.integers(1, min(cap, max_jobs) + 1))
    arr, wts = _arrivals(rng, n), _weights(rng, n)
    jobs = []
    for i in range(n):
        times = np.round(_log_uniform(rng, 0.2, 5.0, machines), 3)
        if machines > 1:
            times[rng.random(machines) < 0.15] = np.inf
            if np.all(np.isinf(times)):
                times[int(rng.integers(machines))] = round(float(_log_uniform(rng, 0.2, 5.0)), 3)
        preds = frozenset(j for j in range(i) if rng.random() < 0.25)
        jobs.append(Job(i, float(arr[i]), float(wts[i]), MachinePayload(tuple(float(t) for t in times), preds)))
    return Instance(tuple(jobs), MachinesEnvironment(machines, preemptive))


GENERATORS = {"trp": random_trp, "darp": random_darp, "machines": random_machines}


def fuzz_instance(problem: str, seed: int, index: int, max_jobs: int = 6) -> Instance:
    return GENERATORS[problem](np.random.default_rng([seed, index]), max_jobs)


# -- lower-bound constructions ---------------------------------------------

def two_job_instance(gamma: float, eps: float, omega: float = 0.0, problem: str | None = None) -> Instance:
    """A light job fixing min(I) = 1, then a heavy one arriving just after tau_1.

    The optimum serves each job on arrival; MIMIC commits to the light job in
    phase one and reaches the heavy one only a full phase later.
    """
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    problem = problem or ("trp" if gamma >= 1 else "machines")
    tau1 = (2 + gamma) ** (1 + omega)
    if problem == "trp":
        metric = MetricSpace.line([0.0, 1.0, tau1 + eps])
        jobs = (Job(0, 1.0, eps, TrpPayload(1)), Job(1, tau1 + eps, 1.0, TrpPayload(2)))
        return Instance(jobs, TrpEnvironment(metric), gamma)
    if problem == "machines":
        jobs = (Job(0, 0.0, eps, MachinePayload((1.0,))),
                Job(1, tau1 + eps / 2, 1.0, MachinePayload((eps / 2,))))
        return Instance(jobs, MachinesEnvironment(1), gamma)
    raise ValueError(f"no two-job construction for {problem!r}")


def one_job_instance(gamma: float, problem: str | None = None) -> Instance:
    """One unit-weight job that any schedule can finish at time 1."""
    problem = problem or ("trp" if gamma >= 1 else "machines")
    if problem == "trp":
        return Instance((Job(0, 1.0, 1.0, TrpPayload(1)),), TrpEnvironment(MetricSpace.line([0.0, 1.0])), gamma)
    if problem == "machines":
        return Instance((Job(0, 0.0, 1.0, MachinePayload((1.0,))),), MachinesEnvironment(1), gamma)
    raise ValueError(f"no one-job construction for {problem!r}")


def mimic_ratio(instance: Instance, omega: float = 0.0) -> float:
    return run_mimic(instance, omega).cost.total / get_oracle(instance).opt_cost()


def tightness(gamma: float, eps: float = 1e-5, omega: float = 0.0, problem: str | None = None,
              sweep=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6), quadrature_points: int = 32) -> dict:
    det = mimic_ratio(two_job_instance(gamma, eps, omega, problem), omega)
    rows = []
    for e in sweep:
        r = mimic_ratio(two_job_instance(gamma, e, omega, problem), omega)
        rows.append({"epsilon": e, "ratio": r, "gap": 3 + gamma - r})
    one = one_job_instance(gamma, problem)
    expected = randomized_expected_cost(one, quadrature_points) / get_oracle(one).opt_cost()
    return {
        "gamma": gamma, "epsilon": eps, "omega": omega,
        "problem": problem or ("trp" if gamma >= 1 else "machines"),
        "deterministic_ratio": det, "deterministic_bound": 3 + gamma, "deterministic_gap": 3 + gamma - det,
        "sweep": rows,
        "gap_shrinks": all(b["gap"] <= a["gap"] for a, b in zip(rows, rows[1:])),
        "randomized_ratio": expected, "randomized_bound": randomized_bound(gamma),
        "randomized_gap": abs(expected - randomized_bound(gamma)),
    }


# -- randomized dial-a-ride lower-bound expression -------------------------

def flaw_value(m, v, k, dps: int = 50):
    """The lower-bound expression L_{m,v} for k-server dial-a-ride, evaluated exactly as printed."""
    import mpmath

    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < v <= 1:
        raise ValueError("v must lie in (0, 1]")
    if m <= 0:
        raise ValueError("m must be positive")
    if m == 2:
        raise ZeroDivisionError("exponent (m+1)/(2-m) is undefined at m = 2")
    with mpmath.workdps(dps):
        m, v, k = mpmath.mpf(m), mpmath.mpf(v), mpmath.mpf(k)
        p = v ** ((m + 1) / (2 - m))
        num = 3 * m - 4 * k * m - 4 * k * m ** 2 + p * (3 + (4 * k * m ** 2 + 4 * k * m + 6 * m + 6) * v)
        den = -4 - m - 2 * k * m - 2 * k * m ** 2 + p * (3 + (2 * k * m ** 2 + 2 * k * m + 4 * m + 4) * v)
        if den == 0:
            raise ZeroDivisionError(f"denominator vanishes at m={m}, v={v}, k={k}")
        return float(num / den)


def flaw_limit(k: float, v: float) -> float:
    """Limit of L_{m,v} as m grows with k and v fixed.

    The m^2 terms cancel (v**((m+1)/(2-m)) * v -> 1), so the limit is the
    ratio of the order-m terms, where v**(3/(2-m)) ~ 1 - 3 ln(v)/m contributes.
    """
    lv = math.log(v)
    return (9 - 12 * k * lv) / (3 - 6 * k * lv)


def flaw_table(k: int, m_list, v: float) -> list[dict]:
    rows = []
    for m in m_list:
        try:
            value = flaw_value(m, v, k)
        except ZeroDivisionError:
            value = math.nan
        rows.append({"k": k, "v": v, "m": m, "L": value, "limit": flaw_limit(k, v),
                     "distance_to_2": abs(value - 2)})
    return rows


# -- fuzzing --------------------------------------------------------------

FUZZ_COLUMNS = ("K", "Q", "p_star", "dual_objective")


def audit_rows(problem: str, seed: int, index: int, max_jobs: int = 6, configs=DISC_CONFIGS):
    """Rows and violations for one fuzzed instance: MIMIC(gamma, 0) plus every DISC config."""
    from .audit import audit_instance
    from .problems import instance_to_dict

    inst = fuzz_instance(problem, seed, index, max_jobs)
    opt = get_oracle(inst).opt_cost()
    rows, bad = [], []
    base = {"id": index, "problem": problem, "gamma": inst.gamma}
    for M, beta in configs:
        rep = audit_instance(inst, M, beta)
        if M == configs[0][0] and beta == configs[0][1]:
            rows.append({**base, "algorithm": "mimic", "cost": rep.mimic_ratio * opt, "opt": opt,
                         "ratio": rep.mimic_ratio, "bound": 3 + inst.gamma})
        rows.append({**base, "algorithm": f"disc(M={M},beta={beta:.6g})", "cost": rep.expected_cost,
                     "opt": opt, "ratio": rep.ratio, "bound": rep.bound, "K": rep.K, "Q": rep.Q,
                     "p_star": rep.cert.p_star, "dual_objective": rep.cert.dual_objective})
        if not rep.ok:
            bad.append({"id": index, "M": M, "beta": beta, "seed": seed, "messages": rep.violations,
                        "instance": instance_to_dict(inst)})
    return rows, bad


def _audit_job(args):
    return audit_rows(*args)


def fuzz(problem: str, count: int, seed: int = 0, max_jobs: int = 6, configs=DISC_CONFIGS,
         workers: int = 1) -> ExperimentReport:
    """Audit ``count`` random instances; rows come back ordered by instance id."""
    if problem not in GENERATORS:
        raise ValueError(f"unknown problem {problem!r}")
    if max_jobs < 1:
        raise ValueError("max_jobs must be >= 1")
    jobs = [(problem, seed, i, max_jobs, tuple(configs)) for i in range(count)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_audit_job, jobs, chunksize=8))
    else:
        results = [_audit_job(j) for j in jobs]
    report = ExperimentReport(extra_columns=FUZZ_COLUMNS)
    for rows, bad in results:
        for r in rows:
            report.add(r)
        report.violations.extend(bad)
    return report


# -- reports ---------------------------------------------------------------

REPORT_COLUMNS = ("id", "problem", "gamma", "algorithm", "cost", "opt", "ratio", "bound", "margin")


@dataclass
class ExperimentReport:
    rows: list[dict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)
    extra_columns: tuple[str, ...] = ()

    def add(self, row: dict) -> None:
        row = dict(row)
        row.setdefault("margin", row["bound"] - row["ratio"])
        self.rows.append(row)

    def aggregate(self) -> dict:
        by_alg: dict[str, float] = {}
        for r in self.rows:
            by_alg[r["algorithm"]] = max(by_alg.get(r["algorithm"], -math.inf), r["ratio"])
        return {"count": len(self.rows),
                "instances": len({r["id"] for r in self.rows}),
                "max_ratio": max((r["ratio"] for r in self.rows), default=math.nan),
                "max_ratio_by_algorithm": dict(sorted(by_alg.items())),
                "min_margin": min((r["margin"] for r in self.rows), default=math.nan),
                "violations": len(self.violations)}

    def csv_text(self) -> str:
        cols = list(REPORT_COLUMNS) + [c for c in self.extra_columns if c not in REPORT_COLUMNS]
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({c: repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols})
        return buf.getvalue()

    def write(self, prefix) -> list[Path]:
        """``prefix.csv``, ``prefix.json`` (aggregate and violations) and ``prefix.gp``."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        out = [prefix.with_suffix(".csv"), prefix.with_suffix(".json"), prefix.with_suffix(".gp")]
        out[0].write_text(self.csv_text())
        out[1].write_text(json.dumps({"aggregate": self.aggregate(), "violations": self.violations},
                                     indent=2, sort_keys=True) + "\n")
        out[2].write_text(gnuplot_script(out[0].name, prefix.name))
        return out


def gnuplot_script(csv_name: str, title: str) -> str:
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}: ratio against bound per row'",
        "set xlabel 'row'",
        "set ylabel 'ratio'",
        f"plot '{csv_name}' using 0:7 with points title 'ratio', \\",
        f"     '{csv_name}' using 0:8 with lines title 'bound'",
        "",
    ])


__all__ = [
    "DISC_CONFIGS", "ExperimentReport", "FAMILY_GAMMA", "FUZZ_COLUMNS", "GENERATORS", "PROBLEMS",
    "audit_rows", "flaw_limit", "flaw_table", "flaw_value", "fuzz", "fuzz_instance", "gnuplot_script",
    "mimic_ratio", "one_job_instance", "random_darp", "random_machines", "random_metric", "random_trp",
    "tightness", "two_job_instance",
]
