"""Finite metric spaces given as weighted graphs."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ..core import ABS_TOL, InstanceError


def floyd_warshall(weights: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths; ``inf`` marks a missing edge."""
    dist = np.array(weights, dtype=float, copy=True)
    n = dist.shape[0]
    np.fill_diagonal(dist, 0.0)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k, None] + dist[None, k, :])
    return dist


@dataclass(frozen=True)
class MetricSpace:
    """Shortest-path metric on points ``0..n-1``.

    ``distances`` is stored as nested tuples so that instances stay hashable;
    use :attr:`matrix` for array access.
    """

    distances: tuple[tuple[float, ...], ...]
    origin: int = 0

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        n = len(self.distances)
        if d.shape != (n, n) or n == 0:
            raise InstanceError(f"distance matrix must be square and non-empty, got shape {d.shape}")
        if not 0 <= self.origin < n:
            raise InstanceError(f"origin {self.origin} is not a point of the metric")
        if not np.all(np.isfinite(d)):
            raise InstanceError("metric must be connected (all distances finite)")
        if np.any(d < 0):
            raise InstanceError("distances must be non-negative")
        if np.any(np.abs(np.diag(d)) > 0):
            raise InstanceError("d(p, p) must be 0")
        if not np.allclose(d, d.T, rtol=0, atol=ABS_TOL):
            raise InstanceError("distance matrix must be symmetric")
        closure = floyd_warshall(d)
        gap = d - closure
        if np.any(gap > ABS_TOL * np.maximum(1.0, d)):
            p, q = np.unravel_index(int(np.argmax(gap)), gap.shape)
            raise InstanceError(f"triangle inequality violated between points {p} and {q}")

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[float]], origin: int = 0) -> "MetricSpace":
        return cls(tuple(tuple(float(x) for x in row) for row in matrix), origin)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]], origin: int = 0) -> "MetricSpace":
        """Shortest-path closure of an undirected weighted graph."""
        w = np.full((n, n), np.inf)
        for u, v, length in edges:
            if length < 0:
                raise InstanceError(f"edge ({u}, {v}) has negative length")
            w[u, v] = w[v, u] = min(w[u, v], float(length))
        return cls.from_matrix(floyd_warshall(w).tolist(), origin)

    @classmethod
    def line(cls, positions: Sequence[float], origin: int = 0) -> "MetricSpace":
        """Points on the real line (a path graph)."""
        x = np.asarray(positions, dtype=float)
        return cls.from_matrix(np.abs(x[:, None] - x[None, :]).tolist(), origin)

    @property
    def n_points(self) -> int:
        return len(self.distances)

    @cached_property
    def matrix(self) -> np.ndarray:
        m = np.asarray(self.distances, dtype=float)
        m.setflags(write=False)
        return m

    def d(self, p: int, q: int) -> float:
        return self.distances[p][q]

    def to_dict(self) -> dict:
        return {"distances": [list(row) for row in self.distances], "origin": self.origin}

    @classmethod
    def from_dict(cls, data: dict) -> "MetricSpace":
        origin = int(data.get("origin", 0))
        if "distances" in data:
            return cls.from_matrix(data["distances"], origin)
        if "edges" in data:
            return cls.from_edges(int(data["n"]), [tuple(e) for e in data["edges"]], origin)
        if "line" in data:
            return cls.line(data["line"], origin)
        raise InstanceError("metric needs one of 'distances', 'edges' or 'line'")
