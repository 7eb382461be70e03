"""Closed-form dual solution of the factor-revealing LP and its verification.

Dual variables, by the primal family they price: ``xi`` (opt_rel), ``C``
(weight_rel_1), ``E`` (weight_rel_2), ``D[l, q]`` (mix row for ``q < l``),
``B`` (weight_rel_last), ``G`` (weight_rel_easy_1) and ``H``
(weight_rel_easy_2).  There is one dual constraint per primal variable;
they are checked two ways: through the hand-derived formulas below, and as
``y^T A >= c`` against the primal matrix itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import TOL

# dual constraint families, named by the primal variable they price
DUAL_FAMILIES = ("g_fresh", "g_stale", "g_fresh_last", "g_stale_last",
                 "w_fresh", "w_stale", "w_fresh_last", "w_stale_last")
TIGHT_FAMILIES = ("g_fresh", "g_stale", "g_fresh_last", "g_stale_last", "w_fresh", "w_fresh_last")


@dataclass
class DualSolution:
    gamma: float
    M: int
    K: int
    delta: float
    eta_ext: np.ndarray      # eta(-M-1), ..., eta(Q); extended geometrically past Q
    xi: np.ndarray
    B: np.ndarray
    G: np.ndarray
    H: np.ndarray
    D: np.ndarray            # D[l, q] for 0 <= q < l <= Q
    C: np.ndarray
    E: np.ndarray

    @property
    def Q(self) -> int:
        return self.K * self.M + self.M - 1

    def eta(self, i: int) -> float:
        k = i + self.M + 1
        if 0 <= k < len(self.eta_ext):
            return float(self.eta_ext[k])
        # beyond the stored range: same geometric extension as below -1
        return float(self.eta_ext[self.M + 1]) * self.delta ** i

    def Delta(self, k: int) -> float:
        return math.fsum(self.delta ** i for i in range(k + 1))

    def L(self, q: int) -> int:
        return self.M * self.K + q % self.M

    def S(self, q: int) -> range:
        return range(q + self.M, self.L(q) - self.M + 1, self.M)

    def R(self, q: int) -> float:
        return math.fsum(self.D[l, q] for l in range(q + 1, self.Q + 1))

    def U(self, q: int, j: int) -> float:
        return math.fsum([self.D[l, q] for l in range(q + 1, self.Q + 1)]
                         + [-self.D[q, l] for l in range(j, q)])

    def V(self, q: int, j: int) -> float:
        return math.fsum([self.eta(l) * self.D[q, l] for l in range(j, q)]
                         + [-self.eta(q) * self.D[l, q] for l in range(q + 1, self.Q + 1)])

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.eta_ext))))


def build_dual(gamma: float, M: int, K: int, etas=None) -> DualSolution:
    """Assign every dual variable for ``Q = K*M + M - 1``.

    ``etas`` gives ``eta(-1..Q)``; by default ``eta(q) = delta**q``.  Indices
    below -1 are filled geometrically from ``eta(0)``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if M < 1:
        raise ValueError("M must be >= 1")
    Q = K * M + M - 1
    delta = (2.0 + gamma) ** (1.0 / M)
    if etas is None:
        etas = np.array([delta ** q for q in range(-1, Q + 1)])
    etas = np.asarray(etas, dtype=float)
    if len(etas) != Q + 2:
        raise ValueError(f"need eta(-1..{Q}), got {len(etas)} values")
    eta0 = etas[1]
    low = [eta0 * delta ** i for i in range(-M - 1, -1)]
    eta_ext = np.concatenate([low, etas])

    def Delta(k):
        return math.fsum(delta ** i for i in range(k + 1))

    first_last = Q - M + 1
    xi = np.zeros(Q + 1)
    for q in range(first_last, Q + 1):
        xi[q] = 1 + delta ** (q - Q + M)
    B = np.zeros((Q + 1, Q + 1))
    G = np.zeros((Q + 1, Q + 1))
    for q in range(Q + 1):
        for j in range(q + 1):
            if j >= first_last:
                B[q, j] = xi[q]
            elif q == j:
                B[q, j] = delta * Delta(M - 1)
            elif j + 1 <= q <= j + M:
                B[q, j] = 1.0
            if j >= first_last:
                G[q, j] = Delta(q - Q + M - 1) - Delta(q - j)
            elif j <= q - M:
                G[q, j] = Delta(q - j - M - 1)
    H = np.zeros((Q + 1, Q + 1))
    D = np.zeros((Q + 1, Q + 1))
    for q in range(Q + 1):
        for j in range(q + 1):
            H[q, j] = B[q, j] + G[q, j] - 1
        for j in range(q):
            D[q, j] = B[q, j + 1] - B[q, j]
    eta = lambda i: float(eta_ext[i + M + 1])
    C = np.zeros(Q + 1)
    E = np.zeros(Q + 1)
    for q in range(Q + 1):
        if q < first_last:
            C[q] = eta(q - M - 1) * (delta ** (M + 1) + 1) * (delta ** M - 1)
        else:
            E[q] = eta(q - M - 1) * (delta ** (M + 1) + 1)
    return DualSolution(gamma, M, K, delta, eta_ext, xi, B, G, H, D, C, E)


def dual_objective(dual: DualSolution) -> float:
    return math.fsum(dual.xi[dual.Q - dual.M + 1:])


def objective_closed_form(gamma: float, M: int) -> float:
    return M + math.fsum((2 + gamma) ** (j / M) for j in range(1, M + 1))


@dataclass
class FamilyCheck:
    count: int = 0
    min_slack: float = math.inf
    max_abs_slack: float = 0.0
    violations: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def add(self, q, j, lhs, rhs, tol):
        slack = lhs - rhs
        self.count += 1
        self.min_slack = min(self.min_slack, slack)
        self.max_abs_slack = max(self.max_abs_slack, abs(slack))
        self.rows.append({"index": [q, j], "lhs": lhs, "rhs": rhs, "slack": slack})
        if slack < -tol:
            self.violations.append((q, j, lhs, rhs, slack))


@dataclass
class DualReport:
    families: dict[str, FamilyCheck]
    negative: list               # (variable, q, j, value) below -tol
    objective: float
    expected_objective: float
    tol: float

    @property
    def ok(self) -> bool:
        return (not self.negative and all(not f.violations for f in self.families.values())
                and math.isclose(self.objective, self.expected_objective, rel_tol=1e-12))

    def tight(self, family: str) -> bool:
        return self.families[family].max_abs_slack <= self.tol

    def tight_families(self) -> list[str]:
        return [f for f in DUAL_FAMILIES if self.tight(f)]

    def violations(self) -> list[tuple]:
        return [(name,) + v for name, f in self.families.items() for v in f.violations]

    def to_rows(self) -> list[dict]:
        out = []
        for name, f in self.families.items():
            for row in f.rows:
                out.append({"family": name, **row})
        return out


def verify_dual(dual: DualSolution, tol: float = TOL) -> DualReport:
    """Check sign constraints and every dual constraint over its full index range."""
    Q, M = dual.Q, dual.M
    scaled = tol * dual.scale
    eta = dual.eta
    negative = []
    for name, arr in (("B", dual.B), ("G", dual.G), ("H", dual.H)):
        for q in range(Q + 1):
            for j in range(q + 1):
                if arr[q, j] < -scaled:
                    negative.append((name, q, j, float(arr[q, j])))
    for q in range(Q + 1):
        for j in range(q):
            if dual.D[q, j] < -scaled:
                negative.append(("D", q, j, float(dual.D[q, j])))
        for name, arr in (("xi", dual.xi), ("C", dual.C), ("E", dual.E)):
            if arr[q] < -scaled:
                negative.append((name, q, -1, float(arr[q])))

    fam = {f: FamilyCheck() for f in DUAL_FAMILIES}
    for q in range(Q + 1):
        last = q >= Q - M + 1
        for j in range(q + 1):
            U, V = dual.U(q, j), dual.V(q, j)
            B, G, H = dual.B[q, j], dual.G[q, j], dual.H[q, j]
            if not last:
                fam["g_fresh"].add(q, j, math.fsum([U, G, -H]), 1.0, scaled)
                fam["g_stale"].add(q, j, U - B, 0.0, scaled)
                cs = math.fsum(dual.C[l] for l in dual.S(q))
                fam["w_fresh"].add(q, j, math.fsum([V, eta(j - 1) * H, -eta(j) * G, dual.E[dual.L(q)], -cs]),
                                   eta(q), scaled)
                fam["w_stale"].add(q, j, math.fsum([V, eta(j - 1) * B, dual.C[q]]), 0.0, scaled)
            else:
                xi = dual.xi[q]
                fam["g_fresh_last"].add(q, j, math.fsum([U, G, -H, xi]), 1.0, scaled)
                fam["g_stale_last"].add(q, j, math.fsum([U, -B, xi]), 0.0, scaled)
                fam["w_fresh_last"].add(q, j, math.fsum([V, -eta(j) * G, eta(j - 1) * H]), eta(q), scaled)
                fam["w_stale_last"].add(q, j, math.fsum([V, eta(j - 1) * B, -dual.E[q]]), 0.0, scaled)
    return DualReport(fam, negative, dual_objective(dual), objective_closed_form(dual.gamma, M), scaled)


def dual_vector(dual: DualSolution, lp) -> np.ndarray:
    """Dual values laid out in the primal LP's row order."""
    y = np.zeros(len(lp.row_names))
    for i, name in enumerate(lp.row_names):
        fam = lp.row_family[i]
        parts = name[len(fam) + 1:].split("_")
        nums = [int(p[1:]) for p in parts]
        if fam == "opt_rel":
            y[i] = dual.xi[nums[0]]
        elif fam == "weight_rel_1":
            y[i] = dual.C[nums[0]]
        elif fam == "weight_rel_2":
            y[i] = dual.E[nums[0]]
        elif fam == "mix":
            q, l = nums
            y[i] = dual.D[l, q]
        elif fam == "weight_rel_last":
            y[i] = dual.B[nums[0], nums[1]]
        elif fam == "weight_rel_easy_1":
            y[i] = dual.G[nums[0], nums[1]]
        elif fam == "weight_rel_easy_2":
            y[i] = dual.H[nums[0], nums[1]]
    return y


def check_against_primal(dual: DualSolution, lp, tol: float = TOL) -> dict:
    """Weak-duality certificate computed from the primal matrix alone.

    Returns the most negative reduced cost ``(y^T A - c)_k`` (must be
    ``>= -tol*scale``), the smallest dual value, and ``b^T y``.
    """
    y = dual_vector(dual, lp)
    reduced = np.bincount(lp.cols, weights=lp.vals * y[lp.rows], minlength=len(lp.c)) - lp.c
    scale = dual.scale
    return {
        "min_reduced_cost": float(reduced.min()),
        "worst_variable": lp.var_names[int(np.argmin(reduced))],
        "min_dual": float(y.min()),
        "objective": math.fsum(lp.b * y),
        "ok": bool(reduced.min() >= -tol * scale and y.min() >= -tol * scale),
    }


def check_identities(dual: DualSolution) -> dict[str, float]:
    """Largest deviation (relative to the eta scale) of each helper identity.

    ``G_relation_min`` is not an identity but the smallest value of a
    quantity that has to stay non-negative.
    """
    Q, M, d = dual.Q, dual.M, dual.delta
    eta, B, G, H = dual.eta, dual.B, dual.G, dual.H
    sc = dual.scale
    err = {k: 0.0 for k in ("eta_shift", "C_closed", "E_minus_C", "R", "V_early", "V_late",
                            "GH", "G_cases", "U_reduced")}

    def upd(key, a, b):
        err[key] = max(err[key], abs(a - b) / sc)

    for i in range(-M - 1, Q + 1):
        for j in range(0, Q + 1 - i):
            upd("eta_shift", eta(i) * d ** j, eta(i + j))
    g_min = math.inf
    for q in range(Q + 1):
        upd("R", dual.R(q), d * dual.Delta(M - 1) if q <= Q - M else 0.0)
        if q <= Q - M:
            upd("C_closed", dual.C[q], eta(q + M) - eta(q) + eta(q - 1) - eta(q - M - 1))
            upd("E_minus_C", dual.E[dual.L(q)] - math.fsum(dual.C[l] for l in dual.S(q)),
                eta(q + M) + eta(q - 1))
        for j in range(q + 1):
            dg = (eta(j) - eta(j - 1)) * G[q, j]
            if q <= Q - M:
                upd("V_early", dual.V(q, j),
                    eta(q) - eta(q - 1) - eta(q + M) - eta(j - 1) * B[q, j] + dg + eta(j - 1))
            else:
                upd("V_late", dual.V(q, j), eta(q) + dg - eta(j - 1) * B[q, j] + eta(j - 1))
            upd("GH", eta(j) * G[q, j] - eta(j - 1) * H[q, j], dg + eta(j - 1) - eta(j - 1) * B[q, j])
            if Q - M + 1 <= j:
                want = eta(q + j - Q + M - 1) - eta(q)
            elif j <= q - M - 1:
                want = eta(q - M - 1) - eta(j - 1)
            else:
                want = 0.0
            upd("G_cases", dg, want)
            upd("U_reduced", dual.U(q, j), dual.R(q) - B[q, q] + B[q, j])
            g_min = min(g_min, (dg + eta(j - 1) - eta(q - M - 1)) / sc)
    err["G_relation_min"] = g_min
    return {k: float(v) for k, v in err.items()}
