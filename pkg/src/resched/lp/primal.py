"""The factor-revealing maximization LP over per-sub-phase weights and offsets.

Variables are ``wF, wS, gF, gS`` for ``0 <= j <= q <= Q``; every constraint
reads ``row . x <= rhs``.  Families, in row order:

``opt_rel``          sum_j g_qj <= 1 for the last block of M schedules
``weight_rel_1``     stale weight of A_q <= fresh weight of its predecessors (q <= Q-M)
``weight_rel_2``     the reverse inequality for the last block
``mix``              A_q beats the truncation of A_l at eta_q (q < l)
``weight_rel_last``  eta_{j-1} wS_qj <= gS_qj
``weight_rel_easy_1`` gF_qj <= eta_j wF_qj
``weight_rel_easy_2`` eta_{j-1} wF_qj <= gF_qj
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..core import TOL

KINDS = ("wF", "wS", "gF", "gS")
FAMILIES = ("opt_rel", "weight_rel_1", "weight_rel_2", "mix",
            "weight_rel_last", "weight_rel_easy_1", "weight_rel_easy_2")


@dataclass
class PrimalLP:
    """Constraint matrix kept in coordinate form; :attr:`A` densifies on demand."""

    Q: int
    M: int
    etas: np.ndarray              # eta(-1), ..., eta(Q)
    c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray
    row_names: list[str]
    row_family: list[str]
    var_names: list[str]
    index: dict = field(default_factory=dict)   # (kind, q, j) -> column

    @property
    def K(self) -> int:
        return (self.Q + 1) // self.M - 1

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.b), len(self.c)

    @cached_property
    def A(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        np.add.at(dense, (self.rows, self.cols), self.vals)
        return dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.rows, weights=self.vals * x[self.cols], minlength=len(self.b))

    def eta(self, q: int) -> float:
        return float(self.etas[q + 1])

    def counts(self) -> dict[str, int]:
        out = {f: 0 for f in FAMILIES}
        for f in self.row_family:
            out[f] += 1
        return out

    def family_rows(self, family: str) -> np.ndarray:
        return np.array([i for i, f in enumerate(self.row_family) if f == family], dtype=int)


def previous(q: int, M: int) -> range:
    """Indices of the earlier schedules run with the same phase offset."""
    return range(q % M, q - M + 1, M)


def build_primal_lp(Q: int, M: int, etas) -> PrimalLP:
    etas = np.asarray(etas, dtype=float)
    if M < 1:
        raise ValueError("M must be >= 1")
    if Q < 2 * M - 1 or (Q + 1) % M:
        raise ValueError("K must be >= 1 (Q = K*M + M - 1)")
    if len(etas) != Q + 2:
        raise ValueError(f"need eta(-1..{Q}), got {len(etas)} values")
    T = (Q + 1) * (Q + 2) // 2
    tri = lambda q, j: q * (q + 1) // 2 + j
    col = {kind: k * T for k, kind in enumerate(KINDS)}
    qs = np.concatenate([np.full(q + 1, q) for q in range(Q + 1)])
    js = np.concatenate([np.arange(q + 1) for q in range(Q + 1)])
    index = {}
    names = []
    for kind in KINDS:
        for q, j in zip(qs.tolist(), js.tolist()):
            index[kind, q, j] = len(names)
            names.append(f"{kind}_q{q}_j{j}")
    eta_q = etas[qs + 1]
    c = np.zeros(4 * T)
    c[col["wF"]:col["wF"] + T] = eta_q
    c[col["gF"]:col["gF"] + T] = 1.0

    R, C, V = [], [], []
    b, rnames, fams = [], [], []

    def emit(family, name, cols, vals, rhs=0.0):
        r = len(b)
        cols = np.asarray(cols, dtype=np.int64)
        R.append(np.full(len(cols), r, dtype=np.int64))
        C.append(cols)
        V.append(np.broadcast_to(np.asarray(vals, dtype=float), cols.shape))
        b.append(rhs)
        rnames.append(name)
        fams.append(family)

    last = range(Q - M + 1, Q + 1)
    for q in last:
        t = tri(q, 0) + np.arange(q + 1)
        emit("opt_rel", f"opt_rel_q{q}", np.concatenate([col["gF"] + t, col["gS"] + t]), 1.0, 1.0)

    def block(kind, qlist):
        return np.concatenate([col[kind] + tri(l, 0) + np.arange(l + 1) for l in qlist] or [np.zeros(0, int)])

    for q in range(Q - M + 1):
        own, prev = block("wS", [q]), block("wF", previous(q, M))
        emit("weight_rel_1", f"weight_rel_1_q{q}", np.concatenate([own, prev]),
             np.concatenate([np.ones(len(own)), -np.ones(len(prev))]))
    for q in last:
        own, prev = block("wS", [q]), block("wF", previous(q, M))
        emit("weight_rel_2", f"weight_rel_2_q{q}", np.concatenate([prev, own]),
             np.concatenate([np.ones(len(prev)), -np.ones(len(own))]))
    for q in range(Q + 1):
        e = float(etas[q + 1])
        j = np.arange(q + 1)
        tq = tri(q, 0) + j
        for l in range(q + 1, Q + 1):
            tl = tri(l, 0) + j
            cols = np.concatenate([col["gF"] + tq, col["gS"] + tq, col["gF"] + tl, col["gS"] + tl,
                                   col["wF"] + tl, col["wS"] + tl, col["wF"] + tq, col["wS"] + tq])
            n = q + 1
            vals = np.concatenate([np.ones(2 * n), -np.ones(2 * n), np.full(2 * n, e), np.full(2 * n, -e)])
            emit("mix", f"mix_q{q}_l{l}", cols, vals)
    t_all = np.arange(T)
    eta_jm1 = etas[js]        # eta(j - 1)
    eta_j = etas[js + 1]
    for family, (ka, va), (kb, vb) in (
            ("weight_rel_last", ("wS", eta_jm1), ("gS", -1.0)),
            ("weight_rel_easy_1", ("gF", 1.0), ("wF", -eta_j)),
            ("weight_rel_easy_2", ("wF", eta_jm1), ("gF", -1.0))):
        va = np.broadcast_to(va, (T,))
        vb = np.broadcast_to(vb, (T,))
        for t in t_all:
            q, j = int(qs[t]), int(js[t])
            emit(family, f"{family}_q{q}_j{j}", [col[ka] + t, col[kb] + t], [va[t], vb[t]])
    return PrimalLP(Q, M, etas, c, np.concatenate(R), np.concatenate(C), np.concatenate(V),
                    np.array(b), rnames, fams, names, index)


def build_primal(partition, grid=None) -> PrimalLP:
    """LP whose index ranges and eta values match an extracted partition."""
    return build_primal_lp(partition.Q, partition.M, partition.etas)


def point_from_partition(partition, lp: PrimalLP, normalize: bool = True) -> np.ndarray:
    scale = partition.opt_cost if normalize else 1.0
    x = np.zeros(len(lp.var_names))
    arrays = {"wF": partition.wF, "wS": partition.wS, "gF": partition.gF, "gS": partition.gS}
    for (kind, q, j), col in lp.index.items():
        x[col] = arrays[kind][q, j] / scale
    return x


@dataclass
class PrimalReport:
    max_violation: dict[str, float]
    worst_row: dict[str, str]
    objective: float
    ratio_from_lp: float          # objective / (M * OPT) in unnormalized units
    ratio_from_runs: float | None
    opt_identity_error: float     # worst relative gap of sum_j g_qj vs 1 over the last block
    tol: float

    @property
    def ok(self) -> bool:
        return all(v <= 0 for v in self.max_violation.values())

    @property
    def identities_ok(self) -> bool:
        good = self.opt_identity_error <= self.tol
        if self.ratio_from_runs is not None:
            good &= math.isclose(self.ratio_from_lp, self.ratio_from_runs, rel_tol=self.tol)
        return good

    def violated(self) -> list[str]:
        return [f for f, v in self.max_violation.items() if v > 0]


def check_primal_point(partition, lp: PrimalLP, normalize: bool = True,
                       expected_ratio: float | None = None, tol: float = TOL) -> PrimalReport:
    """Evaluate every LP row at the extracted point.

    ``max_violation`` holds, per family, the largest excess of a row over its
    right-hand side beyond ``tol`` times the row's magnitude (``<= 0`` means
    satisfied).  ``expected_ratio`` is E[cost]/OPT from the simulated runs.
    """
    x = point_from_partition(partition, lp, normalize)
    lhs = lp.matvec(x)
    mag = np.bincount(lp.rows, weights=np.abs(lp.vals * x[lp.cols]), minlength=len(lp.b))
    excess = lhs - lp.b - tol * np.maximum(1.0, np.maximum(mag, np.abs(lp.b)))
    worst, where = {}, {}
    for f in FAMILIES:
        rows = lp.family_rows(f)
        if len(rows) == 0:
            worst[f], where[f] = -math.inf, ""
            continue
        i = rows[int(np.argmax(excess[rows]))]
        worst[f], where[f] = float(excess[i]), lp.row_names[i]
    objective = math.fsum(lp.c * x)
    scale = partition.opt_cost if normalize else 1.0
    gap = 0.0
    for q in range(lp.Q - lp.M + 1, lp.Q + 1):
        total = math.fsum(partition.g[q, : q + 1]) / scale
        gap = max(gap, abs(total - partition.opt_cost / scale) / max(partition.opt_cost / scale, 1e-300))
    ratio = objective / lp.M if normalize else objective / lp.M / partition.opt_cost
    return PrimalReport(worst, where, objective, ratio, expected_ratio, gap, tol)
