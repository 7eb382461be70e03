"""Dense tableau simplex with Bland's rule for ``max c.x  s.t.  A x <= b, x >= 0, b >= 0``.

The slack basis is feasible because ``b >= 0``, so no phase one is needed.
``exact=True`` runs the same pivots on :class:`fractions.Fraction` entries
(the float inputs are converted exactly), ruling out rounding artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class UnboundedError(ArithmeticError):
    pass


@dataclass
class SimplexResult:
    value: float
    x: np.ndarray
    iterations: int
    exact_value: Fraction | None = None


def _solve_float(c, A, b, max_iter, eps):
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    for it in range(max_iter):
        cost_row = T[m, :-1]
        entering = next((k for k in range(n + m) if cost_row[k] < -eps), None)
        if entering is None:
            x = np.zeros(n + m)
            x[basis] = T[:m, -1]
            return SimplexResult(float(T[m, -1]), x[:n], it)
        col = T[:m, entering]
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > eps]
        if not ratios:
            raise UnboundedError("LP is unbounded")
        best = min(r for r, _, _ in ratios)
        # Bland: among (near-)minimal ratios, the smallest basic variable leaves
        _, _, row = min((bv, bv, i) for r, bv, i in ratios if r <= best + eps * max(1.0, abs(best)))
        T[row] /= T[row, entering]
        for i in range(m + 1):
            if i != row and T[i, entering] != 0:
                T[i] -= T[i, entering] * T[row]
        basis[row] = entering
    raise RuntimeError(f"simplex did not converge in {max_iter} pivots")


def _solve_exact(c, A, b, max_iter):
    m, n = A.shape
    F = Fraction
    T = [[F(float(A[i, k])) for k in range(n)] + [F(int(i == r)) for r in range(m)] + [F(float(b[i]))]
         for i in range(m)]
    T.append([-F(float(v)) for v in c] + [F(0)] * m + [F(0)])
    basis = list(range(n, n + m))
    for it in range(max_iter):
        entering = next((k for k in range(n + m) if T[m][k] < 0), None)
        if entering is None:
            x = [F(0)] * (n + m)
            for i, bv in enumerate(basis):
                x[bv] = T[i][-1]
            return SimplexResult(float(T[m][-1]), np.array([float(v) for v in x[:n]]), it, T[m][-1])
        ratios = [(T[i][-1] / T[i][entering], basis[i], i) for i in range(m) if T[i][entering] > 0]
        if not ratios:
            raise UnboundedError("LP is unbounded")
        best = min(r for r, _, _ in ratios)
        _, row = min((bv, i) for r, bv, i in ratios if r == best)
        piv = T[row][entering]
        T[row] = [v / piv for v in T[row]]
        prow = T[row]
        for i in range(m + 1):
            f = T[i][entering]
            if i != row and f != 0:
                T[i] = [a - f * p for a, p in zip(T[i], prow)]
        basis[row] = entering
    raise RuntimeError(f"simplex did not converge in {max_iter} pivots")


def simplex_max(c, A, b, exact: bool = False, max_iter: int = 200_000, eps: float = 1e-11) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("right-hand sides must be non-negative (slack basis must be feasible)")
    if exact:
        return _solve_exact(c, A, b, max_iter)
    return _solve_float(c, A, b, max_iter, eps)


def solve_primal_exact(lp, exact: bool | None = None) -> SimplexResult:
    """Optimal value of the factor-revealing LP; rational arithmetic by default when ``Q <= 3``."""
    if lp.Q > 6:
        raise ValueError(f"dense simplex is limited to Q <= 6, got Q={lp.Q}")
    if exact is None:
        exact = lp.Q <= 3
    return simplex_max(lp.c, lp.A, lp.b, exact=exact)
