"""Directed communication graphs: adjacency/Laplacian, shortest paths, subpaths.

Node indices are 1-based on the public surface. An edge (i, j) means node i
receives information from node j.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class NotConnectedError(Exception):
    """No directed path between the requested nodes."""

    def __init__(self, i, j):
        super().__init__(f"no directed path from node {i} to node {j}")
        self.pair = (i, j)


@dataclass(frozen=True)
class DiGraph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("node count must be positive")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge ({i},{j}) out of range 1..{self.n}")

    def successors(self, i):
        """Nodes that node i receives information from."""
        return sorted(j for (a, j) in self.edges if a == i)

    def neighbors(self, i):
        """N(i): out-neighbor indices (nonzero off-diagonal Laplacian row entries)."""
        return set(self.successors(i))


@dataclass(frozen=True)
class Path:
    nodes: tuple

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 2:
            raise ValueError("a path needs at least two nodes")

    @property
    def length(self):
        return len(self.nodes) - 1

    @property
    def head(self):
        return self.nodes[0]

    @property
    def tail(self):
        return self.nodes[-1]

    def validate(self, g: DiGraph):
        for a, b in zip(self.nodes, self.nodes[1:]):
            if (a, b) not in g.edges:
                raise ValueError(f"({a},{b}) is not an edge")
        return self


def adjacency(g: DiGraph) -> np.ndarray:
    a = np.zeros((g.n, g.n), dtype=int)
    for i, j in g.edges:
        a[i - 1, j - 1] = 1
    return a


def laplacian(g: DiGraph) -> np.ndarray:
    a = adjacency(g)
    return np.diag(a.sum(axis=1)) - a


def shortest_path(g: DiGraph, i: int, j: int) -> Path:
    """BFS shortest directed path from i to j; smallest-index predecessor tie-break."""
    if i == j:
        raise ValueError("endpoints must differ")
    # BFS visiting successors in ascending order makes the predecessor of each
    # node the smallest-index node at the previous BFS layer, which is the
    # documented deterministic tie-break.
    prev = {i: None}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        if u == j:
            break
        for v in g.successors(u):
            if v not in prev:
                prev[v] = u
                queue.append(v)
    if j not in prev:
        raise NotConnectedError(i, j)
    nodes = [j]
    while prev[nodes[-1]] is not None:
        nodes.append(prev[nodes[-1]])
    return Path(tuple(reversed(nodes)))


def split_at(p: Path, theta: int):
    """Split p at 1-based node position theta into (q, q_c) sharing the pivot node."""
    r = len(p.nodes)
    if not 2 <= theta <= r - 1:
        raise ValueError(f"split position {theta} out of range for {r} nodes")
    return Path(p.nodes[:theta]), Path(p.nodes[theta - 1:])
