"""Dense two-phase simplex method.

Solves

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0        (except the indices listed in ``free``)

with Bland's rule for both the entering and the leaving variable, so the
method cannot cycle. Everything is dense numpy; the systems solved in this
package have few rows (one per graph node plus a handful) and at most a few
thousand columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tolerance

__all__ = [
    "LPError",
    "Infeasible",
    "Unbounded",
    "IllPosed",
    "LPResult",
    "linprog",
    "find_feasible",
]

_PIVOT_TOL = 1e-11


class LPError(Exception):
    """Base class for linear-program failures."""


class Infeasible(LPError):
    """The constraint system has no solution.

    ``y_ub`` and ``y_eq`` form a Farkas certificate in the caller's row
    orientation: ``y_ub <= 0`` and ``y_ub @ A_ub + y_eq @ A_eq <= 0`` on the
    nonnegative columns (``== 0`` on free ones) while
    ``y_ub @ b_ub + y_eq @ b_eq > 0``.
    """

    def __init__(self, message: str, y_ub: np.ndarray, y_eq: np.ndarray, gap: float):
        super().__init__(message)
        self.y_ub = y_ub
        self.y_eq = y_eq
        self.gap = gap


class Unbounded(LPError):
    """The objective is unbounded below on the feasible set."""


class IllPosed(LPError, ValueError):
    """Malformed input: shape mismatch or non-finite data."""


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    residual: float
    iterations: int = field(default=0, compare=False)


def _as_system(A, b, n: int, name: str) -> tuple[np.ndarray, np.ndarray]:
    if A is None:
        if b is not None and np.size(b):
            raise IllPosed(f"{name}: right-hand side given without matrix")
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.shape[0] == 0:
        return np.zeros((0, n)), np.zeros(0)
    if A.shape[1] != n or b.shape != (A.shape[0],):
        raise IllPosed(f"{name}: expected shape (m, {n}) and (m,), got {A.shape} and {b.shape}")
    return A, b


class _Tableau:
    """Simplex tableau with an explicit basis list.

    Row ``k < m`` holds ``B^-1 A`` and ``B^-1 b``; the last row holds the
    reduced costs and ``-objective`` in the corner.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, n_struct: int):
        m, n = A.shape
        self.m = m
        self.n_struct = n_struct
        self.T = np.zeros((m + 1, n + m + 1))
        self.T[:m, :n] = A
        self.T[:m, n : n + m] = np.eye(m)
        self.T[:m, -1] = b
        self.basis = list(range(n, n + m))
        self.n_cols = n + m
        self.iterations = 0

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, c] = 0.0
        T[r, c] = 1.0
        self.basis[r] = c
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> bool:
        """Bland's-rule iterations; False when the objective is unbounded."""
        T = self.T
        while True:
            if self.iterations > max_iter:
                raise LPError(f"simplex exceeded {max_iter} pivots")
            d = T[-1, :-1]
            candidates = np.flatnonzero((d < -tolerance.EPS * 1e-2) & allowed)
            if candidates.size == 0:
                return True
            c = int(candidates[0])
            column = T[: self.m, c]
            pos = np.flatnonzero(column > _PIVOT_TOL)
            if pos.size == 0:
                return False
            rhs = np.maximum(T[pos, -1], 0.0)
            ratios = rhs / column[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, c)


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    free=(),
    max_iter: int | None = None,
) -> LPResult:
    """Minimize ``c @ x`` over the polyhedron described above.

    Raises :class:`Infeasible` (with a Farkas certificate), :class:`Unbounded`
    or :class:`IllPosed`.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.shape[0]
    A_ub, b_ub = _as_system(A_ub, b_ub, n, "A_ub")
    A_eq, b_eq = _as_system(A_eq, b_eq, n, "A_eq")
    for arr in (c, A_ub, b_ub, A_eq, b_eq):
        if not np.all(np.isfinite(arr)):
            raise IllPosed("non-finite entry in linear program data")
    free = sorted(set(int(i) for i in free))
    if any(i < 0 or i >= n for i in free):
        raise IllPosed("free index out of range")

    # free variables are split as x = x+ - x-; the x- columns are appended
    neg = np.zeros((n, len(free)))
    for k, i in enumerate(free):
        neg[i, k] = -1.0
    expand = np.hstack([np.eye(n), neg])
    cs = c @ expand
    Aub = A_ub @ expand
    Aeq = A_eq @ expand
    n_x = expand.shape[1]
    m_ub, m_eq = Aub.shape[0], Aeq.shape[0]

    A = np.zeros((m_ub + m_eq, n_x + m_ub))
    A[:m_ub, :n_x] = Aub
    A[:m_ub, n_x:] = np.eye(m_ub)
    A[m_ub:, :n_x] = Aeq
    b = np.concatenate([b_ub, b_eq])
    cost = np.concatenate([cs, np.zeros(m_ub)])

    # row scaling leaves the feasible set unchanged and tames the tolerances
    scale = np.maximum(np.abs(A).max(axis=1, initial=0.0), np.abs(b))
    scale[scale == 0] = 1.0
    sign = np.where(b < 0, -1.0, 1.0)
    rowmul = sign / scale
    A = A * rowmul[:, None]
    b = b * rowmul

    m, n_std = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n_std) + 1000
    if m == 0:
        if np.any(cost < 0):
            raise Unbounded("objective unbounded on the nonnegative orthant")
        x = np.zeros(n_std)
        return _finish(x, expand, n, c, A_ub, b_ub, A_eq, b_eq, 0)

    tab = _Tableau(A, b, n_std)
    T = tab.T
    # phase 1: minimize the sum of artificials
    T[-1, :n_std] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    allowed = np.ones(tab.n_cols, dtype=bool)
    tab.run(allowed, max_iter)
    infeas = -T[-1, -1]
    if infeas > tolerance.EPS:
        # y_k = 1 - reduced cost of artificial k, then undo the row scaling
        y = 1.0 - T[-1, n_std : n_std + m]
        y = y * rowmul
        raise Infeasible(
            f"constraint system infeasible (phase-1 residual {infeas:.3e})",
            y[:m_ub].copy(),
            y[m_ub:].copy(),
            float(infeas),
        )

    # drive zero-valued artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if tab.basis[r] >= n_std:
            row = T[r, :n_std]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                tab.pivot(r, int(cand[0]))
                keep.append(r)
        else:
            keep.append(r)
    if len(keep) < m:
        T = np.vstack([T[keep], T[-1:]])
        tab.T = T
        tab.basis = [tab.basis[r] for r in keep]
        tab.m = len(keep)

    # phase 2 on the structural + slack columns only
    allowed = np.zeros(tab.n_cols, dtype=bool)
    allowed[:n_std] = True
    T[-1, :] = 0.0
    T[-1, :n_std] = cost
    for r, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[r]
    if not tab.run(allowed, max_iter):
        raise Unbounded("objective unbounded below")

    x = np.zeros(n_std)
    for r, j in enumerate(tab.basis):
        if j < n_std:
            x[j] = max(T[r, -1], 0.0)
    return _finish(x, expand, n, c, A_ub, b_ub, A_eq, b_eq, tab.iterations)


def _finish(x, expand, n, c, A_ub, b_ub, A_eq, b_eq, iterations) -> LPResult:
    xs = expand @ x[: expand.shape[1]]
    res = 0.0
    if A_ub.shape[0]:
        res = max(res, float(np.max(A_ub @ xs - b_ub, initial=0.0)))
    if A_eq.shape[0]:
        res = max(res, float(np.max(np.abs(A_eq @ xs - b_eq))))
    return LPResult(x=xs, objective=float(c @ xs), residual=res, iterations=iterations)


def find_feasible(A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, n: int | None = None, free=()) -> LPResult:
    """Feasibility-only wrapper around :func:`linprog` (zero objective)."""
    if n is None:
        for A in (A_ub, A_eq):
            if A is not None and np.size(A):
                n = np.atleast_2d(A).shape[1]
                break
        else:
            raise IllPosed("cannot infer the number of variables")
    return linprog(np.zeros(n), A_ub, b_ub, A_eq, b_eq, free=free)
