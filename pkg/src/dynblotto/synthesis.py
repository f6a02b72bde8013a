"""Multi-step winning conditions.

* Cycle graphs with a self-loop everywhere: a closed-form defender reply
  that keeps the safe set nonempty forever once it is nonempty.
* Sampling searches for attacker certificates, either independent of the
  initial state (graph-level) or from a given initial state.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import tolerance
from .actions import ExtremeActionSet, canonical_column, enumerate_extreme_actions
from .engagement import EngagementError, regime_report, required_set, required_vector, safe_set
from .graph import DirectedGraph
from .polytope import (
    Polytope,
    contains_point,
    intersect_lower_bounds_nonempty,
    point,
    same_set,
    simplex_with_lower_bounds,
)
from .reachability import reach_point, reach_polytope

__all__ = [
    "CycleError",
    "AttackerCertificate",
    "cycle_order",
    "cycle_defender_step",
    "infer_cycle_flow",
    "flow_matrix",
    "cycle_winning_region",
    "sample_attacker_states",
    "attacker_winning_graph_search",
    "open_loop_attacker_search",
    "verify_certificate",
]

log = logging.getLogger(__name__)


class CycleError(ValueError):
    pass


@dataclass
class AttackerCertificate:
    y_s: np.ndarray
    y_g: np.ndarray
    tau_y: int
    kind: str  # "graph-level" | "initial-condition"
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        ev = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.evidence.items()}
        return {
            "y_s": self.y_s.tolist(),
            "y_g": self.y_g.tolist(),
            "tau_y": self.tau_y,
            "kind": self.kind,
            "evidence": ev,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AttackerCertificate":
        ev = dict(obj.get("evidence", {}))
        for key in ("required", "defender_vertices", "x0"):
            if ev.get(key) is not None:
                ev[key] = np.array(ev[key], dtype=float)
        return cls(np.array(obj["y_s"], float), np.array(obj["y_g"], float), int(obj["tau_y"]), obj["kind"], ev)


# --- cycle graphs -----------------------------------------------------------


def cycle_order(g: DirectedGraph) -> list[int]:
    """Successor of each node (0-indexed) on a self-looped directed cycle.

    Raises :class:`CycleError` unless every node has exactly its self-loop and
    one forward edge, and the forward edges form a single cycle.
    """
    n = g.node_count
    if n < 2:
        raise CycleError("a directed cycle needs at least two nodes")
    succ = []
    for j, outs in enumerate(g.out_neighbors):
        others = [i for i in outs if i != j]
        if j not in outs or len(outs) != 2 or len(others) != 1:
            raise CycleError(f"node {j + 1} is not a self-looped cycle node")
        succ.append(others[0])
    seen, u = set(), 0
    while u not in seen:
        seen.add(u)
        u = succ[u]
    if len(seen) != n or u != 0:
        raise CycleError("forward edges do not form a single cycle")
    return succ


def _pred(succ: list[int]) -> list[int]:
    pred = [0] * len(succ)
    for j, i in enumerate(succ):
        pred[i] = j
    return pred


def cycle_defender_step(x_t1, attacker_flow, g: DirectedGraph | None = None, y_t=None, tol: float | None = None) -> np.ndarray:
    """Defender outflow answering an attacker outflow on a self-looped cycle.

    ``attacker_flow[i]`` is the attacker mass moved from ``i`` to its successor
    in the last step; the reply moves ``attacker_flow[i] + attacker_flow[pred(i)]``
    out of node ``i``. Without ``g`` the natural labeling ``i -> i+1`` is used.
    With ``y_t`` the guard ``x_t1[i] >= y_t[i] + y_t[pred(i)]`` is checked too.
    """
    tol = tolerance.EPS if tol is None else tol
    x_t1 = np.asarray(x_t1, dtype=float)
    f = np.asarray(attacker_flow, dtype=float)
    n = x_t1.size
    succ = cycle_order(g) if g is not None else [(i + 1) % n for i in range(n)]
    pred = _pred(succ)
    scale = max(1.0, float(x_t1.sum()))
    if y_t is not None:
        y_t = np.asarray(y_t, dtype=float)
        guard = y_t + y_t[pred]
        bad = np.flatnonzero(x_t1 < guard - tol * scale)
        if bad.size:
            raise CycleError(f"guard condition fails at node {bad[0] + 1}")
        over = np.flatnonzero(f > y_t + tol * scale)
        if over.size:
            raise CycleError(f"attacker flow exceeds attacker mass at node {over[0] + 1}")
    out = f + f[pred]
    short = np.flatnonzero(out > x_t1 + tol * scale)
    if short.size:
        i = short[0]
        raise CycleError(f"node {i + 1} cannot afford outflow {out[i]:g} from {x_t1[i]:g}")
    return np.minimum(out, x_t1)


def infer_cycle_flow(y_t, y_t1, g: DirectedGraph) -> np.ndarray:
    """Smallest nonnegative forward flow consistent with ``y_t -> y_t1`` on a cycle."""
    succ = cycle_order(g)
    pred = _pred(succ)
    y_t = np.asarray(y_t, dtype=float)
    y_t1 = np.asarray(y_t1, dtype=float)
    f = np.zeros_like(y_t)
    u = 0
    for _ in range(len(succ) - 1):
        v = succ[u]
        f[v] = y_t[v] - y_t1[v] + f[u]
        u = v
    f -= f.min()
    return np.clip(f, 0.0, y_t)


def flow_matrix(x, outflow, g: DirectedGraph) -> np.ndarray:
    """Transition matrix sending ``outflow[i]`` from node ``i`` to its cycle successor."""
    succ = cycle_order(g)
    x = np.asarray(x, dtype=float)
    n = x.size
    K = np.zeros((n, n))
    for i in range(n):
        if x[i] > 0:
            move = min(1.0, outflow[i] / x[i])
            K[succ[i], i] = move
            K[i, i] = 1.0 - move
        else:
            K[canonical_column(g, i), i] = 1.0
    return K


def cycle_winning_region(x, y, ext_d: ExtremeActionSet, ext_a: ExtremeActionSet) -> str:
    """"Defender" or "Attacker" on a self-looped cycle with ``X >= 2Y``."""
    cycle_order(ext_d.graph)
    if ext_a.graph != ext_d.graph:
        raise CycleError("cycle classification assumes both players share the graph")
    X, Y = float(np.sum(x)), float(np.sum(y))
    if X < 2 * Y - tolerance.EPS * max(1.0, X):
        raise CycleError("cycle classification requires X >= 2Y")
    return "Defender" if safe_set(x, y, ext_d, ext_a, canonical=False) else "Attacker"


# --- sampling -----------------------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Compositions of ``total`` into ``parts`` nonnegative parts, first part descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def sample_attacker_states(g: DirectedGraph, Y: float, spec: dict | None = None) -> list[np.ndarray]:
    """Deterministic attacker samples on the simplex of mass ``Y``.

    ``spec`` holds ``mode`` (``"concentrated"``, ``"integer"``, ``"mesh"`` or
    ``"default"``) and, for mesh, ``resolution`` (an absolute step that must
    divide ``Y``). ``"default"`` concatenates concentrated, integer (if ``Y``
    is integral) and mesh at ``Y/4``, dropping repeats.
    """
    spec = dict(spec or {"mode": "default"})
    mode = spec.get("mode", "default")
    n = g.node_count
    if mode == "concentrated":
        return [Y * e for e in np.eye(n)]
    if mode == "integer":
        if abs(Y - round(Y)) > tolerance.EPS:
            raise ValueError(f"integer sampling needs an integral total, got {Y}")
        return [np.array(c, dtype=float) for c in _compositions(int(round(Y)), n)]
    if mode == "mesh":
        res = spec.get("resolution")
        if res is None or not res > 0:
            raise ValueError("mesh sampling needs a positive resolution")
        steps = Y / res
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"resolution {res} does not divide the total {Y}")
        steps = int(round(steps))
        return [np.array(c, dtype=float) * res for c in _compositions(steps, n)]
    if mode == "default":
        out = sample_attacker_states(g, Y, {"mode": "concentrated"})
        if abs(Y - round(Y)) <= tolerance.EPS:
            out += sample_attacker_states(g, Y, {"mode": "integer"})
        out += sample_attacker_states(g, Y, {"mode": "mesh", "resolution": spec.get("resolution", Y / 4)})
        uniq: list[np.ndarray] = []
        for v in out:
            if not any(np.max(np.abs(v - u)) <= 1e-12 for u in uniq):
                uniq.append(v)
        return uniq
    raise ValueError(f"unknown sampling mode {mode!r}")


# --- graph-level certificate ----------------------------------------------


class _LazyCascade:
    """Stages of a cascade computed on demand, with saturation detection."""

    def __init__(self, d0: Polytope, ext: ExtremeActionSet):
        self.stages = [d0]
        self.ext = ext
        self.saturated_at: int | None = None

    def stage(self, t: int) -> Polytope:
        while len(self.stages) <= t:
            if self.saturated_at is not None:
                return self.stages[-1]
            nxt = reach_polytope(self.stages[-1], self.ext, stage=len(self.stages))
            if same_set(nxt, self.stages[-1]):
                self.saturated_at = len(self.stages) - 1
                return self.stages[-1]
            self.stages.append(nxt)
        return self.stages[t]


def _required_total_ok(req: np.ndarray, X: float) -> bool:
    return req.sum() <= X + tolerance.EPS * max(1.0, X)


def attacker_winning_graph_search(
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    X: float,
    Y: float,
    samples: dict | list | None = None,
    t_cap: int | None = None,
    ext_d: ExtremeActionSet | None = None,
    ext_a: ExtremeActionSet | None = None,
) -> AttackerCertificate | None:
    """Search sampled attacker pairs for a graph-level win certificate.

    Pairs ``(y_i, y_j)`` are visited by attacker state-to-state time, then by
    sample index. For each, the defender states guarding against ``y_i`` are
    propagated that many steps; if none of them can guard against ``y_j``
    the pair is returned. ``None`` means no sampled pair works, which is not
    a defender guarantee.
    """
    ext_d = ext_d or enumerate_extreme_actions(g_d)
    ext_a = ext_a or enumerate_extreme_actions(g_a)
    report = regime_report(g_d, X, Y)
    if not report.nontrivial:
        raise EngagementError("graph-level search expects the nontrivial regime X >= d+_max Y")
    ys = samples if isinstance(samples, list) else sample_attacker_states(g_a, Y, samples)
    n_s = len(ys)
    if t_cap is None:
        t_cap = 4 * g_a.node_count
    reqs = [required_vector(y, ext_a) for y in ys]

    for i, y in enumerate(ys):
        if not _required_total_ok(reqs[i], X):
            log.info("sample %d: required total %.6g exceeds X; immediate certificate", i, reqs[i].sum())
            return AttackerCertificate(
                y.copy(), y.copy(), 0, "graph-level",
                {"reason": "required total exceeds X", "required": reqs[i], "X": X},
            )

    attacker_flows: dict[int, _LazyCascade] = {}
    defender_flows: dict[int, _LazyCascade] = {}
    reached: dict[tuple[int, int], int] = {}

    def tau_of(i: int, j: int, tau: int) -> bool:
        """True iff y_j is first reachable from y_i at exactly ``tau`` steps."""
        if (i, j) in reached:
            return reached[(i, j)] == tau
        cas = attacker_flows.setdefault(i, _LazyCascade(point(ys[i]), ext_a))
        stage = cas.stage(tau)
        if cas.saturated_at is not None and tau > cas.saturated_at:
            return False
        if contains_point(stage, ys[j]):
            reached[(i, j)] = tau
            return True
        return False

    for tau in range(1, t_cap + 1):
        for i in range(n_s):
            for j in range(n_s):
                if i == j or (i, j) in reached and reached[(i, j)] < tau:
                    continue
                if not tau_of(i, j, tau):
                    continue
                dflow = defender_flows.get(i)
                if dflow is None:
                    d1 = simplex_with_lower_bounds(reqs[i], X)
                    dflow = defender_flows[i] = _LazyCascade(d1, ext_d)
                stage = dflow.stage(tau)
                ok, _ = intersect_lower_bounds_nonempty(stage, required_set(ys[j], ext_a))
                if not ok:
                    return AttackerCertificate(
                        ys[i].copy(), ys[j].copy(), tau, "graph-level",
                        {
                            "X": X,
                            "required": reqs[j],
                            "defender_vertices": stage.vertices.copy(),
                            "defender_stage": tau + 1,
                        },
                    )
    return None


# --- initial-condition certificate ---------------------------------------


def open_loop_attacker_search(
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    x0,
    y0,
    t_max: int,
    samples: dict | list | None = None,
    ext_d: ExtremeActionSet | None = None,
    ext_a: ExtremeActionSet | None = None,
) -> AttackerCertificate | None:
    """Look for an attacker goal reachable at ``t-1`` that no defender state at ``t`` guards.

    Candidates at each step are the sampled states lying in the attacker's
    reachable set, followed by that set's own vertices. ``None`` is
    inconclusive.
    """
    ext_d = ext_d or enumerate_extreme_actions(g_d)
    ext_a = ext_a or enumerate_extreme_actions(g_a)
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    Y = float(y0.sum())
    pool = samples if isinstance(samples, list) else sample_attacker_states(g_a, Y, samples)
    dx = reach_point(x0, ext_d)
    dy = point(y0)
    t = 1
    while t < t_max:
        cands = [y for y in pool if contains_point(dy, y)]
        for v in dy.vertices:
            if not any(np.max(np.abs(v - c)) <= 1e-12 for c in cands):
                cands.append(v.copy())
        for yc in cands:
            lb = required_set(yc, ext_a)
            ok, _ = intersect_lower_bounds_nonempty(dx, lb)
            if not ok:
                return AttackerCertificate(
                    y0.copy(), yc.copy(), t - 1, "initial-condition",
                    {"x0": x0.copy(), "required": lb.bounds, "defender_vertices": dx.vertices.copy(), "defender_stage": t},
                )
        dx = reach_polytope(dx, ext_d, stage=t + 1)
        dy = reach_polytope(dy, ext_a, stage=t)
        t += 1
    return None


def verify_certificate(
    cert: AttackerCertificate,
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    X: float,
) -> bool:
    """Recompute a certificate's emptiness verdict from scratch."""
    ext_d = enumerate_extreme_actions(g_d)
    ext_a = enumerate_extreme_actions(g_a)
    if cert.evidence.get("reason") == "required total exceeds X":
        return not _required_total_ok(required_vector(cert.y_s, ext_a), X)
    # the attacker must actually reach y_g from y_s in tau_y steps
    dy = point(cert.y_s)
    for _ in range(cert.tau_y):
        dy = reach_polytope(dy, ext_a)
    if not contains_point(dy, cert.y_g):
        return False
    if cert.kind == "graph-level":
        d = simplex_with_lower_bounds(required_vector(cert.y_s, ext_a), X)
        if d is None:
            return True
        for _ in range(cert.tau_y):
            d = reach_polytope(d, ext_d)
    else:
        d = point(np.asarray(cert.evidence["x0"], dtype=float))
        for _ in range(cert.tau_y + 1):
            d = reach_polytope(d, ext_d)
    ok, _ = intersect_lower_bounds_nonempty(d, required_set(cert.y_g, ext_a))
    return not ok
