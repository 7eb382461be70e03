"""End-to-end certificate for one instance: runs, partition, primal point, dual, P*.

The dual certificate and the LP optimum depend only on ``(gamma, M, K)``
(every eta is a common scale times ``delta**q``), so both are computed once
per key with ``eta(q) = delta**q`` and reused across instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import TOL, Instance
from .lp import (build_dual, build_primal, build_primal_lp, check_against_primal, check_primal_point,
                 export_lp, solve_primal_exact, verify_dual)
from .mimic import check_online_identity, disc_bound, extract_partition, run_disc, run_mimic
from .oracle import get_oracle

CHAIN_SLACK = 1e-7
BOUND_SLACK = 1e-9
MAX_EXACT_Q = 6


@dataclass(frozen=True)
class Certificate:
    gamma: float
    M: int
    K: int
    dual_ok: bool
    tight: tuple[str, ...]
    dual_objective: float
    reduced_cost_ok: bool
    min_reduced_cost: float
    violations: tuple = ()
    p_star: float | None = None


@lru_cache(maxsize=512)
def certificate(gamma: float, M: int, K: int, solve: bool = True, tol: float = TOL) -> Certificate:
    """Verify the closed-form dual and, for small Q, solve the primal."""
    dual = build_dual(gamma, M, K)
    rep = verify_dual(dual, tol)
    Q = K * M + M - 1
    delta = (2.0 + gamma) ** (1.0 / M)
    lp = build_primal_lp(Q, M, np.array([delta ** q for q in range(-1, Q + 1)]))
    cross = check_against_primal(dual, lp, tol)
    p_star = None
    if solve and Q <= MAX_EXACT_Q:
        p_star = solve_primal_exact(lp).value
    return Certificate(gamma, M, K, rep.ok, tuple(rep.tight_families()), rep.objective, cross["ok"],
                       cross["min_reduced_cost"], tuple(rep.violations()[:5]), p_star)


@dataclass
class AuditReport:
    problem: str
    gamma: float
    M: int
    beta: float
    K: int
    Q: int
    opt: float
    mimic_ratio: float
    expected_cost: float
    ratio: float
    bound: float
    identity_gap: float
    primal: object
    cert: Certificate
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def chain(self) -> tuple[float, float | None, float]:
        return self.M * self.ratio, self.cert.p_star, self.cert.dual_objective

    def summary(self) -> dict:
        return {
            "problem": self.problem, "gamma": self.gamma, "M": self.M, "beta": self.beta,
            "K": self.K, "Q": self.Q, "opt": self.opt, "mimic_ratio": self.mimic_ratio,
            "expected_cost": self.expected_cost, "ratio": self.ratio, "bound": self.bound,
            "identity_gap": self.identity_gap,
            "primal_max_violation": self.primal.max_violation,
            "opt_identity_error": self.primal.opt_identity_error,
            "dual_ok": self.cert.dual_ok, "dual_tight": list(self.cert.tight),
            "dual_objective": self.cert.dual_objective, "p_star": self.cert.p_star,
            "violations": list(self.violations),
        }


def audit_instance(instance: Instance, M: int = 1, beta: float | None = None, export_path=None,
                   solve: bool = True, tol: float = TOL) -> AuditReport:
    if beta is None:
        beta = 1.0 / M
    oracle = get_oracle(instance)
    opt = oracle.opt_cost()
    gamma = instance.gamma
    bad = []

    det = run_mimic(instance, 0.0).cost.total / opt
    if det > 3 + gamma + BOUND_SLACK:
        bad.append(f"MIMIC ratio {det!r} exceeds {3 + gamma}")

    disc = run_disc(instance, M, beta)
    ratio = disc.expected_cost / opt
    bound = disc_bound(gamma, M)
    if ratio > bound + BOUND_SLACK:
        bad.append(f"DISC ratio {ratio!r} exceeds {bound!r}")

    K = oracle.detect_completion_phase(disc.grid)
    part = extract_partition(instance, disc.grid, K, disc.traces)
    gap = check_online_identity(disc, part)
    if gap > tol:
        bad.append(f"expected cost differs from the fresh-weight formula by {gap:.3g} (relative)")

    lp = build_primal(part, disc.grid)
    primal = check_primal_point(part, lp, normalize=True, expected_ratio=ratio, tol=tol)
    for fam in primal.violated():
        bad.append(f"primal family {fam} violated at {primal.worst_row[fam]} by {primal.max_violation[fam]:.3g}")
    if primal.opt_identity_error > tol:
        bad.append(f"last-block offsets miss OPT by {primal.opt_identity_error:.3g} (relative)")
    if not math.isclose(primal.ratio_from_lp, ratio, rel_tol=tol):
        bad.append(f"LP objective / M = {primal.ratio_from_lp!r} but runs give {ratio!r}")
    if export_path is not None:
        export_lp(lp, export_path)

    cert = certificate(float(gamma), M, K, solve, tol)
    if not cert.dual_ok:
        bad.append(f"dual infeasible: {cert.violations}")
    if not cert.reduced_cost_ok:
        bad.append(f"dual fails y^T A >= c: min reduced cost {cert.min_reduced_cost:.3g}")
    if cert.p_star is not None:
        if M * ratio > cert.p_star + CHAIN_SLACK:
            bad.append(f"M * ratio = {M * ratio!r} exceeds P* = {cert.p_star!r}")
        if cert.p_star > cert.dual_objective + CHAIN_SLACK:
            bad.append(f"P* = {cert.p_star!r} exceeds dual objective {cert.dual_objective!r}")
    elif M * ratio > cert.dual_objective + CHAIN_SLACK:
        bad.append(f"M * ratio = {M * ratio!r} exceeds dual objective {cert.dual_objective!r}")

    return AuditReport(instance.problem, gamma, M, beta, K, part.Q, opt, det, disc.expected_cost,
                       ratio, bound, gap, primal, cert, bad)


__all__ = ["AuditReport", "Certificate", "audit_instance", "certificate"]
