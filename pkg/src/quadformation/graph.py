"""Communication topology among the followers and the leader.

Agents are indexed from 0 internally; the scenario JSON uses 1-based indices
(agent 1 is the first follower, 0 is reserved for the leader).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import NDArray


class GraphError(ValueError):
    """Raised for malformed communication graphs."""


@dataclass(frozen=True)
class CommGraph:
    """Undirected 0/1 graph over ``n`` followers plus leader-access flags.

    Parameters:
        n: number of followers.
        edges: unordered follower pairs ``(i, j)``, 0-based, ``i != j``.
        leader_links: ``a_i0`` for every follower, each 0 or 1.
    """

    n: int
    edges: frozenset[tuple[int, int]]
    leader_links: tuple[int, ...]
    _adjacency: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __init__(self, n: int, edges: Iterable[Iterable[int]], leader_links: Iterable[int]):
        if n < 1:
            raise GraphError(f"agent count must be >= 1, got {n}")
        normalized = set()
        for pair in edges:
            i, j = (int(k) for k in pair)
            if i == j:
                raise GraphError(f"self-loop on agent {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) outside 0..{n - 1}")
            normalized.add((min(i, j), max(i, j)))
        links = tuple(int(a) for a in leader_links)
        if len(links) != n:
            raise GraphError(f"expected {n} leader links, got {len(links)}")
        if any(a not in (0, 1) for a in links):
            raise GraphError("leader links must be 0 or 1 (weighted graphs are not supported)")

        adjacency = np.zeros((n, n))
        for i, j in normalized:
            adjacency[i, j] = adjacency[j, i] = 1.0
        adjacency.setflags(write=False)

        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(normalized))
        object.__setattr__(self, "leader_links", links)
        object.__setattr__(self, "_adjacency", adjacency)

    @property
    def adjacency(self) -> NDArray[np.float64]:
        """The (read-only) ``n x n`` adjacency matrix ``A``."""
        return self._adjacency

    @property
    def leader_matrix(self) -> NDArray[np.float64]:
        """``B = diag(a_10, ..., a_n0)``."""
        return np.diag(np.asarray(self.leader_links, dtype=float))

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.n) if self._adjacency[i, j]]

    @classmethod
    def ring(cls, n: int, leader_links: Iterable[int] | None = None) -> "CommGraph":
        """Cycle 0-1-...-(n-1)-0; by default only agent 0 hears the leader."""
        if leader_links is None:
            leader_links = [1] + [0] * (n - 1)
        if n == 1:
            edges: list[tuple[int, int]] = []
        elif n == 2:
            edges = [(0, 1)]
        else:
            edges = [(i, (i + 1) % n) for i in range(n)]
        return cls(n, edges, leader_links)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i + 1, j + 1] for i, j in sorted(self.edges)],
            "leader_links": list(self.leader_links),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CommGraph":
        n = int(data["n"])
        edges = []
        for pair in data.get("edges", []):
            i, j = (int(k) for k in pair)
            if i < 1 or j < 1:
                raise GraphError(f"scenario edges are 1-based, got [{i}, {j}]")
            edges.append((i - 1, j - 1))
        return cls(n, edges, data["leader_links"])


def laplacian(g: CommGraph) -> NDArray[np.float64]:
    """``L = D - A`` with ``D`` the in-degree matrix."""
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def h_matrix(g: CommGraph) -> NDArray[np.float64]:
    """``H = L + B``; positive definite iff connected with some leader link."""
    return laplacian(g) + g.leader_matrix


def min_eigenvalue(m: NDArray[np.float64]) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(m)[0])


def is_connected(g: CommGraph) -> bool:
    """Breadth-first search over the follower edges."""
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.neighbors(i):
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == g.n


@dataclass(frozen=True)
class GraphReport:
    connected: bool
    leader_reachable: bool
    lambda_min_H: float

    @property
    def passed(self) -> bool:
        return self.connected and self.leader_reachable and self.lambda_min_H > 1e-10

    def problems(self) -> list[str]:
        out = []
        if not self.connected:
            out.append("graph is not connected")
        if not self.leader_reachable:
            out.append("no follower has a leader link (B = 0)")
        if self.connected and self.leader_reachable and not self.lambda_min_H > 1e-10:
            out.append(f"lambda_min(H) = {self.lambda_min_H:.3e} is not positive")
        return out


def validate_graph(g: CommGraph) -> GraphReport:
    """Check that the graph is connected and the leader is heard by someone."""
    return GraphReport(
        connected=is_connected(g),
        leader_reachable=any(g.leader_links),
        lambda_min_H=min_eigenvalue(h_matrix(g)),
    )
