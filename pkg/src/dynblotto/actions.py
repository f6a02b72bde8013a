"""Admissible transition matrices and their extreme points.

A transition matrix ``K`` is admissible on a graph when it is column
stochastic, nonnegative and zero off the adjacency pattern. The extreme
admissible matrices pick exactly one out-edge per column; they are stored
compactly as an ``(L, N)`` array of chosen target nodes (0-indexed) and only
materialized as dense matrices on request.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import lp, tolerance
from .graph import DirectedGraph

__all__ = [
    "ActionError",
    "CapacityError",
    "NotReachable",
    "DEFAULT_ACTION_CAP",
    "ExtremeActionSet",
    "enumerate_extreme_actions",
    "is_admissible",
    "decompose",
    "recombine",
    "synth_action",
    "canonical_column",
    "random_admissible",
]

DEFAULT_ACTION_CAP = 10**6


class ActionError(ValueError):
    pass


class CapacityError(RuntimeError):
    """A combinatorial object exceeded its configured size cap."""


class NotReachable(ActionError):
    def __init__(self, message: str, certificate: lp.Infeasible | None = None):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True, eq=False)
class ExtremeActionSet:
    graph: DirectedGraph
    choices: np.ndarray  # (L, N) int, choices[l, j] = target of column j

    def __len__(self) -> int:
        return self.choices.shape[0]

    @cached_property
    def matrices(self) -> np.ndarray:
        """Dense ``(L, N, N)`` stack of the 0/1 matrices."""
        L, n = self.choices.shape
        out = np.zeros((L, n, n))
        cols = np.broadcast_to(np.arange(n), (L, n))
        out[np.arange(L)[:, None], self.choices, cols] = 1.0
        return out

    def matrix(self, index: int) -> np.ndarray:
        n = self.graph.node_count
        K = np.zeros((n, n))
        K[self.choices[index], np.arange(n)] = 1.0
        return K

    def images(self, x: np.ndarray) -> np.ndarray:
        """``(L, N)`` array whose row l is ``K^(l) @ x``."""
        x = np.asarray(x, dtype=float)
        L, n = self.choices.shape
        out = np.zeros((L, n))
        rows = np.arange(L)
        for j in range(n):
            if x[j] != 0.0:
                np.add.at(out, (rows, self.choices[:, j]), x[j])
        return out

    def to_json(self) -> list[list[int]]:
        """Compact form: per-column chosen target, 1-indexed."""
        return (self.choices + 1).tolist()


def enumerate_extreme_actions(g: DirectedGraph, cap: int = DEFAULT_ACTION_CAP) -> ExtremeActionSet:
    outs = g.out_neighbors
    for j, nb in enumerate(outs):
        if not nb:
            raise ActionError(f"no admissible action exists: node {j + 1} has no out-edge")
    count = 1
    for nb in outs:
        count *= len(nb)
    if count > cap:
        raise CapacityError(f"{count} extreme actions exceed the cap of {cap}")
    choices = np.array(list(itertools.product(*outs)), dtype=np.int64).reshape(count, g.node_count)
    choices.setflags(write=False)
    return ExtremeActionSet(g, choices)


def is_admissible(k, g: DirectedGraph, tol: float | None = None) -> bool:
    tol = tolerance.EPS if tol is None else tol
    K = np.asarray(k, dtype=float)
    n = g.node_count
    if K.shape != (n, n):
        raise ActionError(f"matrix shape {K.shape} does not match a {n}-node graph")
    if not np.all(np.isfinite(K)):
        return False
    if np.any(K < -tol):
        return False
    if np.any(np.abs(K[g.adjacency == 0]) > tol):
        return False
    return bool(np.all(np.abs(K.sum(axis=0) - 1.0) <= tol))


def decompose(k, ext: ExtremeActionSet, tol: float | None = None) -> np.ndarray:
    """Convex weights over ``ext`` reconstructing ``k``.

    Uses the product formula: the weight of an extreme action is the product
    of the entries of ``k`` on its active edges.
    """
    K = np.asarray(k, dtype=float)
    if not is_admissible(K, ext.graph, tol):
        raise ActionError("cannot decompose an inadmissible matrix")
    n = ext.graph.node_count
    picked = K[ext.choices, np.arange(n)]
    return np.prod(np.clip(picked, 0.0, None), axis=1)


def recombine(lam, ext: ExtremeActionSet) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    n = ext.graph.node_count
    K = np.zeros((n, n))
    cols = np.arange(n)
    for l in np.flatnonzero(lam):
        K[ext.choices[l], cols] += lam[l]
    return K


def canonical_column(g: DirectedGraph, j: int) -> int:
    """Target used for a column that carries no mass (0-indexed): self-loop if present."""
    outs = g.out_neighbors[j]
    return j if j in outs else outs[0]


def synth_action(x_from, x_to, g: DirectedGraph, tol: float | None = None) -> np.ndarray:
    """Admissible ``K`` with ``K @ x_from == x_to`` from a transportation problem.

    Among all such flows the one moving the least mass off self-loops is
    chosen, so a state that can stay put does. Columns with no mass get the
    canonical completion of :func:`canonical_column`.
    """
    tol = tolerance.EPS if tol is None else tol
    x_from = np.asarray(x_from, dtype=float)
    x_to = np.asarray(x_to, dtype=float)
    n = g.node_count
    if x_from.shape != (n,) or x_to.shape != (n,):
        raise ActionError("state dimension does not match graph")
    if abs(x_from.sum() - x_to.sum()) > max(tol, tol * abs(x_from.sum())):
        raise NotReachable("states carry different total mass")
    active = [j for j in range(n) if x_from[j] > tol]
    edges = [(j, i) for j in active for i in g.out_neighbors[j]]
    m = len(edges)
    A_eq = np.zeros((len(active) + n, m))
    for e, (j, i) in enumerate(edges):
        A_eq[active.index(j), e] = 1.0
        A_eq[len(active) + i, e] = 1.0
    b_eq = np.concatenate([x_from[active], x_to])
    try:
        cost = np.array([0.0 if i == j else 1.0 for j, i in edges])
        sol = lp.linprog(cost, A_eq=A_eq, b_eq=b_eq)
    except lp.Infeasible as exc:
        raise NotReachable("target state is not reachable in one step", exc) from None
    K = np.zeros((n, n))
    for e, (j, i) in enumerate(edges):
        K[i, j] = sol.x[e] / x_from[j]
    for j in range(n):
        if j not in active:
            K[canonical_column(g, j), j] = 1.0
    K /= K.sum(axis=0, keepdims=True)
    if np.max(np.abs(K @ x_from - x_to)) > 10 * tol * max(1.0, x_to.max()):
        raise NotReachable("transport solution failed verification")
    return K


def random_admissible(g: DirectedGraph, rng: np.random.Generator, extreme_prob: float = 0.0) -> np.ndarray:
    """Random admissible matrix, one flat-Dirichlet column per node.

    With probability ``extreme_prob`` a column is a single random out-edge.
    """
    n = g.node_count
    K = np.zeros((n, n))
    for j, outs in enumerate(g.out_neighbors):
        if extreme_prob and rng.random() < extreme_prob:
            K[outs[rng.integers(len(outs))], j] = 1.0
        else:
            K[list(outs), j] = rng.dirichlet(np.ones(len(outs)))
    return K
