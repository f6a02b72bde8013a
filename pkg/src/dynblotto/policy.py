"""Safe-set propagation over a horizon and open-loop strategy extraction.

The defender's safe stage ``D_t`` holds the states reachable from ``D_{t-1}``
that dominate every attacker state reachable at ``t``. A concrete open-loop
strategy is read off backwards: pick a point of the last stage, then
repeatedly find a predecessor in the previous stage and an admissible action
joining them (BackProp).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import lp, tolerance
from .actions import CapacityError, ExtremeActionSet, NotReachable, canonical_column, enumerate_extreme_actions, is_admissible
from .graph import DirectedGraph
from .polytope import LowerBoundSet, Polytope, clip_lower_bounds, contains_point, max_min_surplus, point
from .reachability import DEFAULT_VERTEX_CAP, reach_polytope
from .trace import Outcome, StrategyTrace, TraceStep

__all__ = [
    "ExtractionError",
    "SafeSetFlow",
    "BackPropResult",
    "propagate_safe_flow",
    "back_prop",
    "extract_defender_strategy",
    "attacker_plan_to",
]

log = logging.getLogger(__name__)


class ExtractionError(RuntimeError):
    pass


@dataclass
class SafeSetFlow:
    defender_safe: list[Polytope]
    defender_reach: list[Polytope]
    attacker_reach: list[Polytope]
    required: list[np.ndarray]  # required[t] is the bound behind defender_safe[t]; required[0] is zero
    truncation: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.defender_safe) - 1


@dataclass
class BackPropResult:
    predecessor_state: np.ndarray
    action: np.ndarray
    psi: np.ndarray  # (S, L)
    theta: np.ndarray
    lambda_: np.ndarray = field(repr=False)


def propagate_safe_flow(
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    x0,
    y0,
    horizon: int,
    ext_d: ExtremeActionSet | None = None,
    ext_a: ExtremeActionSet | None = None,
    vertex_cap: int = DEFAULT_VERTEX_CAP,
) -> SafeSetFlow:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    ext_d = ext_d or enumerate_extreme_actions(g_d)
    ext_a = ext_a or enumerate_extreme_actions(g_a)
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    d = point(x0)
    ry = point(y0)
    flow = SafeSetFlow([d], [d], [ry], [np.zeros_like(x0)])
    for t in range(1, horizon + 1):
        try:
            rx = reach_polytope(flow.defender_safe[-1], ext_d, vertex_cap, stage=t)
            ry = reach_polytope(ry, ext_a, vertex_cap, stage=t)
        except CapacityError as exc:
            raise CapacityError(f"safe-set propagation, stage {t}: {exc}") from None
        req = ry.vertices.max(axis=0)
        flow.defender_reach.append(rx)
        flow.attacker_reach.append(ry)
        flow.required.append(req)
        safe = clip_lower_bounds(rx, LowerBoundSet(req))
        if safe is None:
            flow.truncation = t
            log.info("safe set empty at t=%d", t)
            return flow
        if len(safe) > vertex_cap:
            raise CapacityError(f"safe-set propagation, stage {t}: {len(safe)} vertices exceed the cap")
        flow.defender_safe.append(safe)
    return flow


def back_prop(d_prev: Polytope, x_next, ext: ExtremeActionSet, tol: float | None = None) -> BackPropResult:
    """A point of ``d_prev`` and an admissible action taking it to ``x_next``.

    Solves for joint weights ``psi[s, l] >= 0`` summing to one with
    ``sum psi[s, l] K_l v_s = x_next``; ``theta`` and ``lambda_`` are its
    marginals. The action is rebuilt from the edge flows the weights induce,
    which reproduces ``x_next`` exactly even when ``psi`` is not rank one.
    """
    tol = tolerance.EPS if tol is None else tol
    x_next = np.asarray(x_next, dtype=float)
    Vs = d_prev.vertices
    S, L = len(Vs), len(ext)
    n = ext.graph.node_count
    imgs = np.stack([ext.images(v) for v in Vs])  # (S, L, n)
    R = imgs.reshape(S * L, n).T
    A_eq = np.vstack([R, np.ones((1, S * L))])
    b_eq = np.concatenate([x_next, [1.0]])
    try:
        sol = lp.find_feasible(A_eq=A_eq, b_eq=b_eq, n=S * L)
    except lp.Infeasible as exc:
        raise NotReachable("target is not reachable from the given stage", exc) from None
    psi = np.clip(sol.x, 0.0, None).reshape(S, L)
    psi /= psi.sum()
    theta = psi.sum(axis=1)
    lam = psi.sum(axis=0)
    pred = theta @ Vs

    # edge flow f[i, j] = sum psi[s, l] * v_s[j] over (s, l) with l choosing j -> i
    flow = np.zeros((n, n))
    cols = np.arange(n)
    for s in range(S):
        w = psi[s]
        nz = np.flatnonzero(w)
        if nz.size == 0:
            continue
        for j in range(n):
            if Vs[s, j] != 0.0:
                np.add.at(flow[:, j], ext.choices[nz, j], w[nz] * Vs[s, j])
    K = np.zeros((n, n))
    for j in cols:
        if pred[j] > tol:
            K[:, j] = flow[:, j] / flow[:, j].sum()
        else:
            K[canonical_column(ext.graph, j), j] = 1.0
    err = float(np.max(np.abs(K @ pred - x_next)))
    if err > 10 * tol * max(1.0, float(x_next.sum())):
        raise ExtractionError(f"reconstructed action misses the target by {err:.3e}")
    return BackPropResult(pred, K, psi, theta, lam)


def extract_defender_strategy(flow: SafeSetFlow, ext: ExtremeActionSet) -> StrategyTrace:
    """Open-loop defender trace that stays inside every safe stage."""
    if flow.truncation is not None:
        raise ExtractionError(
            f"safe set is empty at t={flow.truncation}; use the attacker certificate tools instead"
        )
    T = flow.horizon
    x_T, _ = max_min_surplus(flow.defender_safe[T], LowerBoundSet(flow.required[T]))
    states = [x_T]
    actions = []
    for t in range(T, 0, -1):
        res = back_prop(flow.defender_safe[t - 1], states[-1], ext)
        states.append(res.predecessor_state)
        actions.append(res.action)
    states.reverse()
    actions.reverse()
    states[0] = flow.defender_safe[0].vertices[0].copy()
    trace = StrategyTrace()
    trace.steps.append(TraceStep(0, "defender", None, states[0]))
    for t in range(1, T + 1):
        K = actions[t - 1]
        if not is_admissible(K, ext.graph, 1e-9):
            raise ExtractionError(f"extracted action at t={t - 1} is not admissible")
        trace.steps.append(TraceStep(t, "defender", K, K @ trace.steps[-1].state))
    trace.outcome = Outcome("guarded", T)
    return trace


def attacker_plan_to(y0, y_g, steps: int, ext_a: ExtremeActionSet) -> list[np.ndarray]:
    """Open-loop attacker matrices driving ``y0`` to ``y_g`` in exactly ``steps`` steps."""
    stages = [point(y0)]
    for t in range(steps):
        stages.append(reach_polytope(stages[-1], ext_a, stage=t + 1))
    if not contains_point(stages[-1], y_g):
        raise NotReachable(f"goal not reachable in {steps} steps")
    target = np.asarray(y_g, dtype=float)
    plan = []
    for t in range(steps, 0, -1):
        res = back_prop(stages[t - 1], target, ext_a)
        plan.append(res.action)
        target = res.predecessor_state
    plan.reverse()
    return plan
