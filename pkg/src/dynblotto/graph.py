"""Directed-graph environment shared by both players.

Nodes are 1-indexed at every external boundary (constructors, JSON, CLI
output) and 0-indexed inside numpy arrays. An edge ``(j, i)`` means resource
may move from ``j`` to ``i`` in one step; ``adjacency[i, j] == 1`` for it.
Self-loops are ordinary edges: a node without ``(i, i)`` cannot hold mass.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

__all__ = [
    "GraphError",
    "DirectedGraph",
    "DegreeProfile",
    "build_graph",
    "is_strongly_connected",
    "diameter",
    "degree_profile",
    "shortest_path_lengths",
    "graph_from_json",
    "graph_to_json",
]


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class DirectedGraph:
    node_count: int
    edges: tuple[tuple[int, int], ...]

    @cached_property
    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.node_count, self.node_count), dtype=np.int8)
        for j, i in self.edges:
            A[i - 1, j - 1] = 1
        A.setflags(write=False)
        return A

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        """0-indexed out-neighbors per node, sorted ascending."""
        A = self.adjacency
        return tuple(tuple(int(i) for i in np.flatnonzero(A[:, j])) for j in range(self.node_count))

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        A = self.adjacency
        return tuple(tuple(int(j) for j in np.flatnonzero(A[i, :])) for i in range(self.node_count))

    @property
    def n(self) -> int:
        return self.node_count

    def has_self_loop(self, node: int) -> bool:
        """``node`` is 1-indexed."""
        return bool(self.adjacency[node - 1, node - 1])

    def __repr__(self) -> str:
        return f"DirectedGraph(n={self.node_count}, edges={len(self.edges)})"


@dataclass(frozen=True)
class DegreeProfile:
    out_degrees: tuple[int, ...]
    in_neighbors: tuple[tuple[int, ...], ...]  # 1-indexed
    d_plus_min: int
    d_plus_max: int


def build_graph(node_count: int, edges: Iterable[tuple[int, int]]) -> DirectedGraph:
    """Validate and build a graph from 1-indexed ``(source, target)`` pairs."""
    if int(node_count) != node_count or node_count < 1:
        raise GraphError(f"node_count must be a positive integer, got {node_count!r}")
    node_count = int(node_count)
    seen: set[tuple[int, int]] = set()
    ordered = []
    for e in edges:
        if len(e) != 2:
            raise GraphError(f"edge {e!r} is not a pair")
        j, i = int(e[0]), int(e[1])
        if not (1 <= j <= node_count and 1 <= i <= node_count):
            raise GraphError(f"edge ({j}, {i}) has an endpoint outside [1, {node_count}]")
        if (j, i) in seen:
            raise GraphError(f"duplicate edge ({j}, {i})")
        seen.add((j, i))
        ordered.append((j, i))
    return DirectedGraph(node_count, tuple(sorted(ordered)))


def shortest_path_lengths(g: DirectedGraph) -> np.ndarray:
    """All-pairs BFS. ``D[a, b]`` is the hop count from a to b (0-indexed), -1 if unreachable."""
    n = g.node_count
    D = -np.ones((n, n), dtype=int)
    for s in range(n):
        D[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.out_neighbors[u]:
                if D[s, v] < 0:
                    D[s, v] = D[s, u] + 1
                    queue.append(v)
    return D


def is_strongly_connected(g: DirectedGraph) -> bool:
    return bool(np.all(shortest_path_lengths(g) >= 0))


def diameter(g: DirectedGraph) -> int:
    D = shortest_path_lengths(g)
    if np.any(D < 0):
        raise GraphError("diameter is undefined: graph is not strongly connected")
    return int(D.max())


def degree_profile(g: DirectedGraph) -> DegreeProfile:
    out = tuple(int(d) for d in g.adjacency.sum(axis=0))
    ins = tuple(tuple(j + 1 for j in nb) for nb in g.in_neighbors)
    return DegreeProfile(out, ins, min(out), max(out))


def graph_from_json(obj: dict) -> DirectedGraph:
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise GraphError('graph JSON needs keys "n" and "edges"')
    return build_graph(obj["n"], [tuple(e) for e in obj["edges"]])


def graph_to_json(g: DirectedGraph) -> dict:
    return {"n": g.node_count, "edges": [[j, i] for j, i in g.edges]}
