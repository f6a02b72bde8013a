"""Scenario files: one JSON document describing a game instance.

Layout::

    {
      "graph": {"n": 3, "edges": [[1, 1], [1, 2], ...]},
      "attacker_graph": {...},        # optional, defaults to "graph"
      "X": 2, "Y": 1,
      "x0": [1, 1, 0], "y0": [1, 0, 0],
      "horizon": 10,
      "tolerance": 1e-9               # optional
    }

Validation collects every problem before failing, each tagged with a JSON
path such as ``$.y0[2]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tolerance
from .graph import DirectedGraph, GraphError, build_graph, graph_to_json
from .trace import scenario_hash

__all__ = ["ScenarioError", "Scenario", "parse_scenario", "scenario_from_dict"]

# sums within this many tolerances of the stated total are rescaled, not rejected
_SUM_SLACK = 10.0


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  {p}" for p in self.problems))


@dataclass
class Scenario:
    defender_graph: DirectedGraph
    attacker_graph: DirectedGraph
    X: float
    Y: float
    x0: np.ndarray
    y0: np.ndarray
    horizon: int
    tolerance: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "graph": graph_to_json(self.defender_graph),
            "attacker_graph": graph_to_json(self.attacker_graph),
            "X": self.X,
            "Y": self.Y,
            "x0": self.x0.tolist(),
            "y0": self.y0.tolist(),
            "horizon": self.horizon,
        }
        if self.tolerance is not None:
            out["tolerance"] = self.tolerance
        return out

    def digest(self) -> str:
        return scenario_hash(self.to_json())


def _graph(obj, path: str, problems: list[str]) -> DirectedGraph | None:
    if not isinstance(obj, dict):
        problems.append(f"{path}: expected an object with keys n and edges")
        return None
    n = obj.get("n")
    edges = obj.get("edges")
    ok = True
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        problems.append(f"{path}.n: expected a positive integer, got {n!r}")
        ok = False
    if not isinstance(edges, list):
        problems.append(f"{path}.edges: expected a list of [source, target] pairs")
        return None
    for k, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            problems.append(f"{path}.edges[{k}]: expected a pair of integers, got {e!r}")
            ok = False
        elif ok and not all(1 <= v <= n for v in e):
            problems.append(f"{path}.edges[{k}]: endpoint outside [1, {n}]")
            ok = False
    if not ok:
        return None
    try:
        g = build_graph(n, [tuple(e) for e in edges])
    except GraphError as exc:
        problems.append(f"{path}.edges: {exc}")
        return None
    missing = [j + 1 for j, outs in enumerate(g.out_neighbors) if not outs]
    if missing:
        problems.append(f"{path}.edges: nodes {missing} have no out-edge, so no admissible action exists")
        return None
    return g


def _positive(obj: dict, key: str, problems: list[str]) -> float | None:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        problems.append(f"$.{key}: expected a number, got {v!r}")
        return None
    if v <= 0:
        problems.append(f"$.{key}: resource totals must be positive, got {v!r}")
        return None
    return float(v)


def _vector(obj: dict, key: str, n: int | None, total: float | None, tol: float, problems: list[str], notes: list[str]):
    v = obj.get(key)
    if not isinstance(v, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        problems.append(f"$.{key}: expected a list of numbers")
        return None
    arr = np.asarray(v, dtype=float)
    ok = True
    if n is not None and arr.size != n:
        problems.append(f"$.{key}: has {arr.size} entries but the graph has {n} nodes")
        ok = False
    for k, a in enumerate(arr):
        if not math.isfinite(a):
            problems.append(f"$.{key}[{k}]: not a finite number")
            ok = False
        elif a < 0:
            problems.append(f"$.{key}[{k}]: resource states are nonnegative, got {a:g}")
            ok = False
    if not ok or total is None:
        return arr if ok else None
    s = float(arr.sum())
    if s == total:
        return arr
    if abs(s - total) <= _SUM_SLACK * tol * max(1.0, total):
        notes.append(f"$.{key}: sum {s!r} normalized to {total!r}")
        return arr * (total / s)
    problems.append(f"$.{key}: sums to {s:g}, expected {total:g}")
    return None


def scenario_from_dict(obj) -> Scenario:
    problems: list[str] = []
    notes: list[str] = []
    if not isinstance(obj, dict):
        raise ScenarioError(["$: expected a JSON object"])
    known = {"graph", "attacker_graph", "X", "Y", "x0", "y0", "horizon", "tolerance"}
    for key in sorted(set(obj) - known):
        problems.append(f"$.{key}: unknown key")
    tol = tolerance.EPS
    if "tolerance" in obj:
        t = obj["tolerance"]
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not t > 0:
            problems.append(f"$.tolerance: expected a positive number, got {t!r}")
        else:
            tol = float(t)
    g_d = _graph(obj.get("graph"), "$.graph", problems)
    g_a = g_d
    if "attacker_graph" in obj:
        g_a = _graph(obj["attacker_graph"], "$.attacker_graph", problems)
        if g_d is not None and g_a is not None and g_a.node_count != g_d.node_count:
            problems.append("$.attacker_graph.n: both graphs must share the node set")
    X = _positive(obj, "X", problems)
    Y = _positive(obj, "Y", problems)
    n = g_d.node_count if g_d is not None else None
    x0 = _vector(obj, "x0", n, X, tol, problems, notes)
    y0 = _vector(obj, "y0", n, Y, tol, problems, notes)
    h = obj.get("horizon")
    if isinstance(h, bool) or not isinstance(h, int) or h < 1:
        problems.append(f"$.horizon: expected a positive integer, got {h!r}")
    if problems:
        raise ScenarioError(problems)
    return Scenario(g_d, g_a, X, Y, x0, y0, h, obj.get("tolerance"), notes)


def parse_scenario(path: Path | str) -> Scenario:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"$: malformed JSON ({exc.msg} at line {exc.lineno})"]) from None
    return scenario_from_dict(obj)
