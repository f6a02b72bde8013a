"""Vertex-represented polytopes on a scaled simplex.

Every polytope here lives in node space and all of its vertices share one
coordinate sum (``total``). Membership, redundancy and intersection tests go
through the in-house simplex solver in :mod:`dynblotto.lp`.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from . import lp, tolerance

__all__ = [
    "PolytopeError",
    "Polytope",
    "LowerBoundSet",
    "resource_vector",
    "point",
    "contains_point",
    "prune_redundant",
    "intersect_lower_bounds_nonempty",
    "max_min_surplus",
    "simplex_with_lower_bounds",
    "clip_lower_bounds",
    "same_set",
    "dump_polytope",
    "load_polytope",
]

log = logging.getLogger(__name__)


class PolytopeError(ValueError):
    pass


def resource_vector(values, total: float | None = None, tol: float | None = None) -> np.ndarray:
    """Validate a nonnegative state vector (optionally with a known total)."""
    tol = tolerance.EPS if tol is None else tol
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise PolytopeError("resource vector must be a nonempty 1-D array")
    if not np.all(np.isfinite(v)):
        raise PolytopeError("resource vector has non-finite entries")
    if np.any(v < -tol):
        raise PolytopeError(f"resource vector has a negative entry: {v.min():g}")
    v = np.where(v < 0, 0.0, v)
    if total is not None and abs(v.sum() - total) > tol * max(1.0, abs(total)):
        raise PolytopeError(f"resource vector sums to {v.sum():g}, expected {total:g}")
    return v


@dataclass(frozen=True, eq=False)
class Polytope:
    vertices: np.ndarray  # (k, N)
    total: float

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.shape[0] == 0:
            raise PolytopeError("polytope needs at least one vertex")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def __repr__(self) -> str:
        return f"Polytope(n={self.dim}, vertices={len(self)}, total={self.total:g})"


@dataclass(frozen=True)
class LowerBoundSet:
    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if np.any(b < -tolerance.EPS):
            raise PolytopeError("lower bounds must be nonnegative")
        object.__setattr__(self, "bounds", b)

    @property
    def required_total(self) -> float:
        return float(self.bounds.sum())


def point(x) -> Polytope:
    x = np.asarray(x, dtype=float)
    return Polytope(x[None, :], float(x.sum()))


def _check_mass(p: Polytope, v: np.ndarray, tol: float) -> None:
    if v.shape != (p.dim,):
        raise PolytopeError(f"point of dimension {v.shape} vs polytope dimension {p.dim}")
    if abs(v.sum() - p.total) > tol * max(1.0, abs(p.total)) * 10:
        raise PolytopeError(f"point mass {v.sum():g} differs from polytope total {p.total:g}")


def _hull_weights(V: np.ndarray, v: np.ndarray) -> lp.LPResult | None:
    k = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, k))])
    b_eq = np.concatenate([v, [1.0]])
    try:
        return lp.find_feasible(A_eq=A_eq, b_eq=b_eq, n=k)
    except lp.Infeasible:
        return None


def contains_point(p: Polytope, v, tol: float | None = None) -> bool:
    tol = tolerance.EPS if tol is None else tol
    v = np.asarray(v, dtype=float)
    _check_mass(p, v, tol)
    return _hull_weights(p.vertices, v) is not None


def _lexsort_rows(V: np.ndarray) -> np.ndarray:
    return V[np.lexsort(V.T[::-1])]


def _dedupe(V: np.ndarray, tol: float) -> np.ndarray:
    V = _lexsort_rows(V)
    kept: list[np.ndarray] = []
    for row in V:
        # duplicates need not be adjacent after a lexicographic sort with noise
        if not any(np.max(np.abs(row - q)) <= tol for q in kept[-64:]):
            kept.append(row)
    out = np.array(kept)
    if len(out) > 64:
        # full pass for the rare long-range duplicate
        keep = np.ones(len(out), dtype=bool)
        for a in range(len(out)):
            if keep[a]:
                close = np.max(np.abs(out[a + 1 :] - out[a]), axis=1) <= tol
                keep[a + 1 :][close] = False
        out = out[keep]
    return out


def _certified_vertices(V: np.ndarray, tol: float) -> np.ndarray:
    """Points that are the unique maximizer or minimizer of some coordinate."""
    sure = np.zeros(len(V), dtype=bool)
    for col in V.T:
        for arr in (col, -col):
            top = arr.max()
            hits = np.flatnonzero(arr >= top - tol)
            if hits.size == 1:
                sure[hits[0]] = True
    return sure


def prune_redundant(p: Polytope, tol: float | None = None) -> Polytope:
    """Minimal vertex set with the same convex hull, in lexicographic order."""
    tol = tolerance.EPS if tol is None else tol
    V = _dedupe(np.asarray(p.vertices), tol)
    if len(V) <= 2:
        return Polytope(V, p.total)
    alive = np.ones(len(V), dtype=bool)
    sure = _certified_vertices(V, tol)
    for idx in range(len(V)):
        if sure[idx]:
            continue
        others = alive.copy()
        others[idx] = False
        if _hull_weights(V[others], V[idx]) is not None:
            alive[idx] = False
    return Polytope(V[alive], p.total)


def intersect_lower_bounds_nonempty(p: Polytope, lb: LowerBoundSet, tol: float | None = None):
    """``(True, witness)`` if some point of ``p`` dominates ``lb``, else ``(False, None)``."""
    tol = tolerance.EPS if tol is None else tol
    b = np.asarray(lb.bounds, dtype=float)
    if b.shape != (p.dim,):
        raise PolytopeError("bound dimension does not match polytope")
    if b.sum() > p.total + tol * max(1.0, p.total):
        return False, None
    V = p.vertices
    ok = np.all(V >= b - tol, axis=1)
    if ok.any():
        return True, V[int(np.flatnonzero(ok)[0])].copy()
    k = V.shape[0]
    # exact bounds first so the witness is clean when it can be; ties within tol still count
    for slack in (0.0, tol):
        try:
            res = lp.find_feasible(A_ub=-V.T, b_ub=-b + slack, A_eq=np.ones((1, k)), b_eq=[1.0], n=k)
        except lp.Infeasible:
            continue
        return True, V.T @ res.x
    return False, None


def max_min_surplus(p: Polytope, lb: LowerBoundSet) -> tuple[np.ndarray, float]:
    """Point of ``p`` maximizing ``min_i (x_i - lb_i)``; the surplus may be negative."""
    V = p.vertices
    k, n = V.shape
    b = np.asarray(lb.bounds, dtype=float)
    # variables: lambda (k), s (free scalar); maximize s
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-V.T, np.ones((n, 1))])
    A_eq = np.zeros((1, k + 1))
    A_eq[0, :k] = 1.0
    res = lp.linprog(c, A_ub=A_ub, b_ub=-b, A_eq=A_eq, b_eq=[1.0], free=[k])
    x = V.T @ res.x[:k]
    return x, float(res.x[-1])


def simplex_with_lower_bounds(bounds, total: float, tol: float | None = None) -> Polytope | None:
    """Vertices of ``{x >= bounds, sum x = total}``; ``None`` when empty.

    The tight-coordinate patterns leave all slack on one node, so the vertices
    are ``bounds + (total - sum bounds) e_i``.
    """
    tol = tolerance.EPS if tol is None else tol
    b = np.asarray(bounds, dtype=float)
    slack = total - b.sum()
    if slack < -tol * max(1.0, total):
        return None
    slack = max(slack, 0.0)
    V = np.tile(b, (b.size, 1)) + slack * np.eye(b.size)
    return prune_redundant(Polytope(V, total), tol)


# --- general intersection with a lower-bound box ---------------------------


def _affine_frame(V: np.ndarray, tol: float):
    c = V.mean(axis=0)
    Q = V - c
    if len(V) == 1:
        return c, np.zeros((V.shape[1], 0)), np.zeros((1, 0))
    _, S, Vt = np.linalg.svd(Q, full_matrices=False)
    r = int(np.sum(S > 1e3 * tol * max(1.0, S[0])))
    B = Vt[:r].T
    return c, B, Q @ B


def _facets(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = Z.shape[1]
    if d == 0:
        return np.zeros((0, 0)), np.zeros(0)
    if d == 1:
        z = Z[:, 0]
        return np.array([[1.0], [-1.0]]), np.array([z.max(), -z.min()])
    hull = ConvexHull(Z)
    eq = hull.equations
    return eq[:, :-1], -eq[:, -1]


def _hpoly_vertices(G: np.ndarray, h: np.ndarray, tol: float, depth: int = 0) -> np.ndarray | None:
    """Vertices of ``{z : G z <= h}`` (bounded); ``None`` when empty."""
    d = G.shape[1]
    norms = np.linalg.norm(G, axis=1)
    zero = norms <= tol
    if np.any(h[zero] < -tol):
        return None
    G, h, norms = G[~zero], h[~zero], norms[~zero]
    if d == 0:
        return np.zeros((1, 0))
    if G.shape[0] == 0:
        raise PolytopeError("unbounded halfspace system")
    # Chebyshev ball: maximize r with G z + r |G_k| <= h, r <= 1
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.vstack([np.hstack([G, norms[:, None]]), np.eye(1, d + 1, d)])
    b = np.concatenate([h, [1.0]])
    try:
        res = lp.linprog(c, A_ub=A, b_ub=b, free=range(d))
    except lp.Infeasible:
        return None
    center, radius = res.x[:d], res.x[-1]
    scale = max(1.0, float(np.abs(h).max()))
    if radius > 1e3 * tol * scale:
        if d == 1:
            g = G[:, 0]
            hi = np.min(h[g > 0] / g[g > 0])
            lo = np.max(h[g < 0] / g[g < 0])
            return np.array([[lo], [hi]])
        halfspaces = np.hstack([G, -h[:, None]])
        try:
            hs = HalfspaceIntersection(halfspaces, center)
        except QhullError:
            log.debug("qhull failed on a thin intersection; falling back to equality search")
        else:
            return hs.intersections
    if depth > d + 1:
        raise PolytopeError("degenerate intersection did not reduce")
    # lower-dimensional set: find implicit equalities among rows tight at the center
    slack = h - G @ center
    tight = np.flatnonzero(slack <= 1e3 * tol * scale)
    eq_rows = []
    for k in tight:
        try:
            r = lp.linprog(G[k], A_ub=G, b_ub=h, free=range(d))
        except lp.Unbounded:
            continue
        if h[k] - r.objective <= 1e3 * tol * scale:
            eq_rows.append(k)
    if not eq_rows:
        eq_rows = [int(tight[np.argmin(slack[tight])])] if tight.size else []
    if not eq_rows:
        raise PolytopeError("could not resolve degenerate intersection")
    GE, hE = G[eq_rows], h[eq_rows]
    z0 = np.linalg.lstsq(GE, hE, rcond=None)[0]
    _, S, Vt = np.linalg.svd(GE)
    rank = int(np.sum(S > 1e-9 * max(1.0, S[0])))
    M = Vt[rank:].T
    rest = np.setdiff1d(np.arange(G.shape[0]), eq_rows)
    W = _hpoly_vertices(G[rest] @ M, h[rest] - G[rest] @ z0, tol, depth + 1)
    if W is None:
        return None
    return z0 + W @ M.T


def clip_lower_bounds(p: Polytope, lb: LowerBoundSet, tol: float | None = None) -> Polytope | None:
    """Vertex representation of ``p ∩ {x >= lb}``; ``None`` when empty."""
    tol = tolerance.EPS if tol is None else tol
    b = np.asarray(lb.bounds, dtype=float)
    nonempty, _ = intersect_lower_bounds_nonempty(p, lb, tol)
    if not nonempty:
        return None
    V = p.vertices
    if np.all(V >= b - tol):
        return p
    c, B, Z = _affine_frame(V, tol)
    if B.shape[1] == 0:
        return p
    G, h = _facets(Z)
    # c + B z >= b  <=>  -B z <= c - b
    G = np.vstack([G, -B])
    h = np.concatenate([h, c - b])
    W = _hpoly_vertices(G, h, tol)
    if W is None:
        return None
    X = c + W @ B.T
    X = np.maximum(X, np.where(b > 0, b, 0.0))
    X = np.where(np.abs(X) < tol, 0.0, X)
    return prune_redundant(Polytope(X, p.total), tol * 10)


def same_set(p: Polytope, q: Polytope, tol: float | None = None) -> bool:
    """Mutual vertex membership."""
    if len(p) == len(q) and np.allclose(_lexsort_rows(p.vertices), _lexsort_rows(q.vertices), atol=1e-9, rtol=0):
        return True
    return all(contains_point(q, v, tol) for v in p.vertices) and all(
        contains_point(p, v, tol) for v in q.vertices
    )


def dump_polytope(p: Polytope, path_csv: Path | str) -> Path:
    """Write vertices as CSV and ``{total, n, vertex_count}`` next to it as JSON."""
    path_csv = Path(path_csv)
    path_csv.parent.mkdir(parents=True, exist_ok=True)
    with path_csv.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(p.dim)])
        for v in p.vertices:
            w.writerow([repr(float(a)) for a in v])
    meta = {"total": p.total, "n": p.dim, "vertex_count": len(p)}
    path_csv.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    return path_csv


def load_polytope(path_csv: Path | str) -> Polytope:
    path_csv = Path(path_csv)
    meta = json.loads(path_csv.with_suffix(".json").read_text())
    with path_csv.open() as fh:
        rows = list(csv.reader(fh))[1:]
    V = np.array([[float(a) for a in r] for r in rows])
    if V.shape != (meta["vertex_count"], meta["n"]):
        raise PolytopeError(f"{path_csv}: vertex table does not match metadata")
    return Polytope(V, float(meta["total"]))
