"""One-step and multi-step reachable sets, and state-to-state time."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tolerance
from .actions import CapacityError, ExtremeActionSet
from .polytope import Polytope, PolytopeError, contains_point, dump_polytope, point, prune_redundant, same_set

__all__ = [
    "DEFAULT_VERTEX_CAP",
    "EXCEEDS_CAP",
    "UNREACHABLE",
    "ReachabilityFlow",
    "reach_point",
    "reach_polytope",
    "cascade",
    "ss_time",
    "dump_flow",
]

log = logging.getLogger(__name__)

DEFAULT_VERTEX_CAP = 50_000
EXCEEDS_CAP = "exceeds cap"
UNREACHABLE = "unreachable"


@dataclass
class ReachabilityFlow:
    stages: list[Polytope]
    ext: ExtremeActionSet
    wall_clock: list[float] = field(default_factory=list)

    @property
    def graph(self):
        return self.ext.graph

    def __len__(self) -> int:
        return len(self.stages)


def reach_point(x, ext: ExtremeActionSet) -> Polytope:
    x = np.asarray(x, dtype=float)
    if x.shape != (ext.graph.node_count,):
        raise PolytopeError(f"state of shape {x.shape} on a {ext.graph.node_count}-node graph")
    return prune_redundant(Polytope(ext.images(x), float(x.sum())))


def reach_polytope(
    d: Polytope, ext: ExtremeActionSet, vertex_cap: int = DEFAULT_VERTEX_CAP, stage: int | None = None
) -> Polytope:
    """Hull of every vertex of ``d`` pushed through every extreme action."""
    n_candidates = len(d) * len(ext)
    if n_candidates > 50 * vertex_cap:
        raise CapacityError(f"stage {stage}: {n_candidates} candidate points exceed the working cap")
    images = np.vstack([ext.images(v) for v in d.vertices])
    out = prune_redundant(Polytope(images, d.total))
    if len(out) > vertex_cap:
        raise CapacityError(f"stage {stage}: {len(out)} vertices exceed the cap of {vertex_cap}")
    return out


def cascade(d0: Polytope, ext: ExtremeActionSet, steps: int, vertex_cap: int = DEFAULT_VERTEX_CAP) -> ReachabilityFlow:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    flow = ReachabilityFlow([d0], ext, [0.0])
    for t in range(1, steps + 1):
        t0 = time.perf_counter()
        flow.stages.append(reach_polytope(flow.stages[-1], ext, vertex_cap, stage=t))
        flow.wall_clock.append(time.perf_counter() - t0)
    return flow


def ss_time(
    x_s,
    x_g,
    ext: ExtremeActionSet,
    t_cap: int | None = None,
    vertex_cap: int = DEFAULT_VERTEX_CAP,
    tol: float | None = None,
) -> int | str:
    """Fewest steps taking ``x_s`` to exactly ``x_g``.

    Returns :data:`EXCEEDS_CAP` once ``t_cap`` steps are spent and
    :data:`UNREACHABLE` when the reachable set saturates without the goal.
    """
    tol = tolerance.EPS if tol is None else tol
    x_s = np.asarray(x_s, dtype=float)
    x_g = np.asarray(x_g, dtype=float)
    if abs(x_s.sum() - x_g.sum()) > tol * max(1.0, abs(x_s.sum())) * 10:
        raise PolytopeError("start and goal states carry different total mass")
    if t_cap is None:
        t_cap = 4 * ext.graph.node_count
    d = point(x_s)
    tau = 0
    while not contains_point(d, x_g, tol):
        if tau >= t_cap:
            return EXCEEDS_CAP
        nxt = reach_polytope(d, ext, vertex_cap, stage=tau + 1)
        tau += 1
        if same_set(nxt, d, tol):
            log.debug("reachable set saturated at stage %d without the goal", tau)
            return UNREACHABLE
        d = nxt
    return tau


def dump_flow(flow: ReachabilityFlow, out_dir: Path | str, prefix: str = "stage") -> Path:
    """Write each stage as polytope CSV plus a flow-level metadata JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, stage in enumerate(flow.stages):
        dump_polytope(stage, out_dir / f"{prefix}_{t:03d}.csv")
    meta = {
        "stages": len(flow.stages),
        "vertex_counts": [len(s) for s in flow.stages],
        "wall_clock": flow.wall_clock,
    }
    path = out_dir / f"{prefix}_flow.json"
    path.write_text(json.dumps(meta, indent=2))
    return path
