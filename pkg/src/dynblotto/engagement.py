"""Per-step contest semantics: breach check, required resource, safe set.

Ties go to the Defender: node ``i`` is breached only when the attacker's mass
exceeds the defender's by more than the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerance
from .actions import ExtremeActionSet, canonical_column
from .graph import DirectedGraph, degree_profile, is_strongly_connected, shortest_path_lengths
from .polytope import LowerBoundSet, Polytope, intersect_lower_bounds_nonempty, max_min_surplus

__all__ = [
    "EngagementError",
    "ConsistencyError",
    "EngagementVerdict",
    "RegimeReport",
    "SafeSetVerdict",
    "check_terminal",
    "required_vector",
    "required_vector_from_graph",
    "required_set",
    "safe_set",
    "attacker_breach_response",
    "breach_response_matrix",
    "regime_report",
    "degenerate_attacker_strategy",
]


class EngagementError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


@dataclass(frozen=True)
class EngagementVerdict:
    breached_nodes: tuple[int, ...]  # 1-indexed

    @property
    def terminal(self) -> bool:
        return bool(self.breached_nodes)


@dataclass(frozen=True)
class RegimeReport:
    x_req_lower: float
    x_req_upper: float
    degenerate_attacker_win: bool
    nontrivial: bool
    d_plus_min: int
    d_plus_max: int
    X: float
    Y: float

    def to_json(self) -> dict:
        return {
            "x_req_lower": self.x_req_lower,
            "x_req_upper": self.x_req_upper,
            "degenerate_attacker_win": self.degenerate_attacker_win,
            "nontrivial": self.nontrivial,
            "d_plus_min": self.d_plus_min,
            "d_plus_max": self.d_plus_max,
            "X": self.X,
            "Y": self.Y,
        }


@dataclass(frozen=True)
class SafeSetVerdict:
    nonempty: bool
    witness: np.ndarray | None
    required: np.ndarray
    surplus: float | None = None

    def __bool__(self) -> bool:
        return self.nonempty


def check_terminal(x, y, tol: float | None = None) -> EngagementVerdict:
    tol = tolerance.EPS if tol is None else tol
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise EngagementError("defender and attacker states differ in dimension")
    return EngagementVerdict(tuple(int(i) + 1 for i in np.flatnonzero(y > x + tol)))


def required_vector_from_graph(y, g: DirectedGraph) -> np.ndarray:
    """In-neighbor form: ``x_req[i] = sum of y over the in-neighbors of i``."""
    return g.adjacency.astype(float) @ np.asarray(y, dtype=float)


def required_vector(y, ext_attacker: ExtremeActionSet, tol: float | None = None) -> np.ndarray:
    """Per-node max over the attacker's one-step reachable vertices.

    Cross-checked against the in-neighbor sum; a mismatch raises
    :class:`ConsistencyError`.
    """
    tol = tolerance.EPS if tol is None else tol
    y = np.asarray(y, dtype=float)
    if y.shape != (ext_attacker.graph.node_count,):
        raise EngagementError("attacker state dimension does not match its graph")
    by_vertex = ext_attacker.images(y).max(axis=0)
    by_graph = required_vector_from_graph(y, ext_attacker.graph)
    if np.max(np.abs(by_vertex - by_graph)) > tol * max(1.0, y.sum()):
        raise ConsistencyError(f"required vector mismatch: {by_vertex} vs {by_graph}")
    return by_vertex


def required_set(y, ext_attacker: ExtremeActionSet) -> LowerBoundSet:
    y = np.asarray(y, dtype=float)
    if not y.sum() > 0:
        raise EngagementError("attacker total must be positive")
    if np.any(y < -tolerance.EPS):
        raise EngagementError("attacker state has a negative entry")
    return LowerBoundSet(required_vector(y, ext_attacker))


def safe_set(
    x,
    y,
    ext_d: ExtremeActionSet,
    ext_a: ExtremeActionSet,
    canonical: bool = True,
    tol: float | None = None,
) -> SafeSetVerdict:
    """Nonemptiness of the defender's safe set, with a witness.

    With ``canonical`` the witness is the max-min-surplus point of the
    intersection rather than the first feasible point found.
    """
    lb = required_set(y, ext_a)
    x = np.asarray(x, dtype=float)
    if x.shape != (ext_d.graph.node_count,):
        raise EngagementError("defender state dimension does not match its graph")
    # both LPs below accept redundant generators, so pruning would be wasted work
    reach = Polytope(ext_d.images(x), float(x.sum()))
    ok, witness = intersect_lower_bounds_nonempty(reach, lb, tol)
    if not ok:
        return SafeSetVerdict(False, None, lb.bounds)
    surplus = None
    if canonical:
        witness, surplus = max_min_surplus(reach, lb)
    return SafeSetVerdict(True, witness, lb.bounds, surplus)


def breach_response_matrix(x_next, y, ext_a: ExtremeActionSet, tol: float | None = None) -> np.ndarray | None:
    """Extreme attacker action that breaches ``x_next`` if one exists, else ``None``.

    Targets the node with the largest shortfall (lowest index on ties). Every
    in-neighbor of that node sends all its mass there; the remaining nodes
    step along a shortest path toward it.
    """
    tol = tolerance.EPS if tol is None else tol
    x_next = np.asarray(x_next, dtype=float)
    y = np.asarray(y, dtype=float)
    req = required_vector(y, ext_a, tol)
    gap = req - x_next
    if not np.any(gap > tol):
        return None
    j = int(np.argmax(gap))
    g = ext_a.graph
    D = shortest_path_lengths(g)
    F = np.zeros((g.node_count, g.node_count))
    for u in range(g.node_count):
        outs = g.out_neighbors[u]
        if j in outs:
            F[j, u] = 1.0
            continue
        closer = [v for v in outs if D[v, j] >= 0 and (D[u, j] < 0 or D[v, j] < D[u, j])]
        F[min(closer) if closer else canonical_column(g, u), u] = 1.0
    return F


def attacker_breach_response(x_next, y, ext_a: ExtremeActionSet, tol: float | None = None):
    """Attacker state after the breaching reply of :func:`breach_response_matrix`, or ``None``."""
    F = breach_response_matrix(x_next, y, ext_a, tol)
    return None if F is None else F @ np.asarray(y, dtype=float)


def regime_report(g: DirectedGraph, X: float, Y: float) -> RegimeReport:
    if not is_strongly_connected(g):
        raise EngagementError("regime classification requires a strongly connected graph")
    if not (X > 0 and Y > 0):
        raise EngagementError("resource totals must be positive")
    prof = degree_profile(g)
    has_loop = any(g.has_self_loop(i + 1) for i in range(g.node_count))
    upper = prof.d_plus_max * Y
    degenerate = (X < upper) and has_loop
    return RegimeReport(
        x_req_lower=prof.d_plus_min * Y,
        x_req_upper=upper,
        degenerate_attacker_win=bool(degenerate),
        nontrivial=bool(X >= upper),
        d_plus_min=prof.d_plus_min,
        d_plus_max=prof.d_plus_max,
        X=float(X),
        Y=float(Y),
    )


def _next_hops(g: DirectedGraph, target: int) -> list[int]:
    """Next node on a shortest path to ``target`` (0-indexed), lowest index on ties."""
    D = shortest_path_lengths(g)
    hops = []
    for u in range(g.node_count):
        if u == target:
            hops.append(u)
            continue
        cands = [v for v in g.out_neighbors[u] if D[v, target] == D[u, target] - 1]
        hops.append(min(cands))
    return hops


def _funnel(g: DirectedGraph, y: np.ndarray, target: int, tol: float) -> list[np.ndarray]:
    hops = _next_hops(g, target)
    n = g.node_count
    plan = []
    while np.any(np.delete(y, target) > tol):
        F = np.zeros((n, n))
        for u in range(n):
            F[hops[u], u] = 1.0
        plan.append(F)
        y = F @ y
    return plan


def degenerate_attacker_strategy(g: DirectedGraph, y0, X: float | None = None, tol: float | None = None) -> list[np.ndarray]:
    """Open-loop plan concentrating the attacker on a max-out-degree node.

    Phase 1 funnels all mass to a self-loop node along shortest paths; phase 2
    walks the concentrated mass to the max-out-degree node. Each phase takes
    at most ``diameter(g)`` steps. When the max-degree node itself has a
    self-loop it is the funnel target and phase 2 is empty.
    """
    tol = tolerance.EPS if tol is None else tol
    y0 = np.asarray(y0, dtype=float)
    Y = float(y0.sum())
    if X is not None and not regime_report(g, X, Y).degenerate_attacker_win:
        raise EngagementError("premises of the degenerate regime do not hold")
    if not is_strongly_connected(g):
        raise EngagementError("graph must be strongly connected")
    loops = [i for i in range(g.node_count) if g.adjacency[i, i]]
    if not loops:
        raise EngagementError("degenerate strategy needs a node with a self-loop")
    prof = degree_profile(g)
    best = [i for i, d in enumerate(prof.out_degrees) if d == prof.d_plus_max]
    looped_best = [i for i in best if i in loops]
    if looped_best:
        return _funnel(g, y0, looped_best[0], tol)
    D = shortest_path_lengths(g)
    star = best[0]
    hub = min(loops, key=lambda i: (D[i, star], i))
    plan = _funnel(g, y0, hub, tol)
    y = y0.copy()
    for F in plan:
        y = F @ y
    hops = _next_hops(g, star)
    n = g.node_count
    pos = hub
    while pos != star:
        F = np.zeros((n, n))
        for u in range(n):
            F[hops[u], u] = 1.0
        plan.append(F)
        pos = hops[pos]
    return plan
