"""Piecewise-linear matrix-valued functions of the clock."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PwlMatrixFunction", "uniform_knots", "aligned_knots"]


def uniform_knots(horizon: float, N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    return np.linspace(0.0, float(horizon), int(N) + 1)


def aligned_knots(T_min: float, T_max: float, N: int) -> np.ndarray:
    """Knots on ``[0, T_max]`` of roughly ``N`` uniform segments that contain ``T_min``.

    If some uniform grid with between ``N`` and ``2N`` segments puts ``T_min``
    on a node (to relative precision 1e-9), that grid is used.  Otherwise the
    uniform ``N``-segment grid gets ``T_min`` inserted as an extra breakpoint.
    """
    if not (0 < T_min <= T_max):
        raise ValueError(f"need 0 < T_min <= T_max, got ({T_min}, {T_max})")
    for M in range(int(N), 2 * int(N) + 1):
        k = T_min * M / T_max
        if abs(k - round(k)) < 1e-9 * max(1.0, k):
            knots = uniform_knots(T_max, M)
            knots[int(round(k))] = T_min
            return knots
    knots = uniform_knots(T_max, N)
    return np.unique(np.concatenate([knots, [T_min]]))


@dataclass(frozen=True, eq=False)
class PwlMatrixFunction:
    """Linear interpolation of node matrices on sorted knot times.

    ``nodes[i]`` is the value at ``knots[i]``.  Evaluation clamps the
    argument to ``[knots[0], knots[-1]]``.
    """

    knots: np.ndarray
    nodes: np.ndarray  # shape (N+1, r, c)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 3 or nodes.shape[0] != knots.size:
            raise ValueError("nodes must have shape (len(knots), r, c)")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def constant(cls, value, horizon: float) -> "PwlMatrixFunction":
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls(np.array([0.0, float(horizon)]), np.stack([value, value]))

    @property
    def N(self) -> int:
        return self.knots.size - 1

    @property
    def horizon(self) -> float:
        return float(self.knots[-1])

    def segment(self, tau: float) -> int:
        i = int(np.searchsorted(self.knots, tau, side="right")) - 1
        return min(max(i, 0), self.N - 1)

    def __call__(self, tau: float) -> np.ndarray:
        tau = min(max(float(tau), self.knots[0]), self.knots[-1])
        i = self.segment(tau)
        t0, t1 = self.knots[i], self.knots[i + 1]
        if tau == t0:
            return self.nodes[i].copy()
        if tau == t1:
            return self.nodes[i + 1].copy()
        w = (tau - t0) / (t1 - t0)
        return (1.0 - w) * self.nodes[i] + w * self.nodes[i + 1]

    def slope(self, tau: float) -> np.ndarray:
        i = self.segment(min(max(float(tau), self.knots[0]), self.knots[-1]))
        return (self.nodes[i + 1] - self.nodes[i]) / (self.knots[i + 1] - self.knots[i])

    def refine(self, factor: int = 2) -> "PwlMatrixFunction":
        """Same function on a grid with every segment split ``factor`` times."""
        knots = [self.knots[0]]
        for i in range(self.N):
            knots.extend(np.linspace(self.knots[i], self.knots[i + 1], factor + 1)[1:])
        knots = np.array(knots)
        return PwlMatrixFunction(knots, np.stack([self(t) for t in knots]))

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "nodes": self.nodes.tolist()}
