"""Sequential game engine, pluggable policies, and an exhaustive integer oracle.

Each step the defender moves first. The attacker then sees the defender's new
state and replies. Only after both moves is the breach check applied. A policy
that returns an inadmissible matrix forfeits, which is recorded separately from
a breach.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import tolerance
from .actions import ExtremeActionSet, canonical_column, enumerate_extreme_actions, is_admissible, random_admissible, synth_action
from .engagement import breach_response_matrix, check_terminal, degenerate_attacker_strategy, required_set, safe_set
from .graph import DirectedGraph
from .polytope import max_min_surplus
from .reachability import reach_point
from .scenario import Scenario
from .synthesis import cycle_defender_step, flow_matrix, infer_cycle_flow
from .trace import Outcome, StrategyTrace, TraceStep

__all__ = [
    "SimulationError",
    "GameState",
    "Policy",
    "HoldPolicy",
    "RandomPolicy",
    "PlanPolicy",
    "MaxMinSurplusDefender",
    "GreedyBreachAttacker",
    "CycleDefender",
    "degenerate_attacker",
    "hold_matrix",
    "step",
    "run",
    "OracleResult",
    "discrete_minimax_oracle",
]

ORACLE_CAPS = {"N": 4, "X": 6, "Y": 3, "horizon": 4}


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class GameState:
    t: int
    x: np.ndarray
    y: np.ndarray
    status: str = "running"  # running | breached | horizon-reached | forfeit
    nodes: tuple[int, ...] = ()
    actor: str | None = None

    @property
    def running(self) -> bool:
        return self.status == "running"


def hold_matrix(g: DirectedGraph) -> np.ndarray:
    """Every node keeps its mass (self-loop), or forwards it where it has none."""
    n = g.node_count
    K = np.zeros((n, n))
    for j in range(n):
        K[canonical_column(g, j), j] = 1.0
    return K


# --- policies -------------------------------------------------------------------
#
# A defender policy is called as ``act(t, x_t, y_t)``; an attacker policy as
# ``act(t, x_next, y_t)``. The engine never hands an attacker anything newer
# than the defender's current move.


class Policy:
    def reset(self, rng: np.random.Generator) -> None:
        pass

    def act(self, t: int, x, y) -> np.ndarray:
        raise NotImplementedError


class HoldPolicy(Policy):
    def __init__(self, g: DirectedGraph):
        self.K = hold_matrix(g)

    def act(self, t, x, y):
        return self.K


class RandomPolicy(Policy):
    def __init__(self, g: DirectedGraph, extreme_prob: float = 0.3):
        self.g = g
        self.extreme_prob = extreme_prob
        self.rng = np.random.default_rng(0)

    def reset(self, rng):
        self.rng = rng

    def act(self, t, x, y):
        return random_admissible(self.g, self.rng, self.extreme_prob)


class PlanPolicy(Policy):
    """Plays a fixed list of matrices by time index, then defers to ``after``."""

    def __init__(self, matrices, after: Policy):
        self.matrices = [np.asarray(m, dtype=float) for m in matrices]
        self.after = after

    def reset(self, rng):
        self.after.reset(rng)

    def act(self, t, x, y):
        if t < len(self.matrices):
            return self.matrices[t]
        return self.after.act(t, x, y)


class MaxMinSurplusDefender(Policy):
    """Moves to the reachable state with the largest worst-node margin over the required vector."""

    def __init__(self, ext_d: ExtremeActionSet, ext_a: ExtremeActionSet):
        self.ext_d = ext_d
        self.ext_a = ext_a

    def act(self, t, x, y):
        lb = required_set(y, self.ext_a)
        target, _ = max_min_surplus(reach_point(x, self.ext_d), lb)
        return synth_action(x, target, self.ext_d.graph)


class GreedyBreachAttacker(Policy):
    """Breaches whenever the revealed defender state allows it, else defers to ``fallback``."""

    def __init__(self, ext_a: ExtremeActionSet, fallback: Policy | None = None):
        self.ext_a = ext_a
        self.fallback = fallback or HoldPolicy(ext_a.graph)

    def reset(self, rng):
        self.fallback.reset(rng)

    def act(self, t, x_next, y):
        F = breach_response_matrix(x_next, y, self.ext_a)
        return F if F is not None else self.fallback.act(t, x_next, y)


class CycleDefender(Policy):
    """Mirror strategy on a self-looped cycle with ``X >= 2Y``.

    The first move lands on a safe-set witness, which gives
    ``x_1 >= y_0 + y_0[pred]``. Afterwards the attacker's last move is read off
    ``(y_{t-1}, y_t)`` and echoed so the same margin carries forward.
    """

    def __init__(self, ext_d: ExtremeActionSet, ext_a: ExtremeActionSet):
        self.ext_d = ext_d
        self.ext_a = ext_a
        self.g = ext_d.graph
        self.prev_y = None

    def reset(self, rng):
        self.prev_y = None

    def act(self, t, x, y):
        y = np.asarray(y, dtype=float)
        if self.prev_y is None:
            verdict = safe_set(x, y, self.ext_d, self.ext_a)
            if not verdict:
                raise SimulationError("cycle defender needs a nonempty safe set at the start")
            K = synth_action(x, verdict.witness, self.g)
        else:
            f = infer_cycle_flow(self.prev_y, y, self.g)
            out = cycle_defender_step(x, f, self.g, y_t=self.prev_y)
            K = flow_matrix(x, out, self.g)
        self.prev_y = y.copy()
        return K


def degenerate_attacker(ext_a: ExtremeActionSet, y0, X: float | None = None) -> Policy:
    """Concentration plan toward a max-out-degree node, breaching at the first chance."""
    plan = degenerate_attacker_strategy(ext_a.graph, y0, X)
    return GreedyBreachAttacker(ext_a, PlanPolicy(plan, HoldPolicy(ext_a.graph)))


# --- engine ---------------------------------------------------------------------


def step(
    state: GameState,
    defender: Policy,
    attacker: Policy,
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    tol: float | None = None,
) -> tuple[GameState, np.ndarray, np.ndarray | None]:
    tol = tolerance.EPS if tol is None else tol
    if not state.running:
        raise SimulationError(f"cannot step a game whose status is {state.status}")
    t = state.t
    K = np.asarray(defender.act(t, state.x.copy(), state.y.copy()), dtype=float)
    if not is_admissible(K, g_d, 1e-9):
        return replace(state, status="forfeit", actor="defender"), K, None
    x_next = K @ state.x
    F = np.asarray(attacker.act(t, x_next.copy(), state.y.copy()), dtype=float)
    if not is_admissible(F, g_a, 1e-9):
        return GameState(t + 1, x_next, state.y, "forfeit", actor="attacker"), K, F
    y_next = F @ state.y
    verdict = check_terminal(x_next, y_next, tol)
    status = "breached" if verdict.terminal else "running"
    return GameState(t + 1, x_next, y_next, status, verdict.breached_nodes), K, F


def run(
    scenario: Scenario,
    defender: Policy,
    attacker: Policy,
    horizon: int | None = None,
    seed: int = 0,
) -> StrategyTrace:
    """Play until a breach, a forfeit, or the horizon. Deterministic given ``seed``."""
    horizon = scenario.horizon if horizon is None else horizon
    if horizon < 0:
        raise SimulationError("horizon must be nonnegative")
    tol = scenario.tolerance
    rng = np.random.default_rng(seed)
    defender.reset(rng)
    attacker.reset(rng)
    state = GameState(0, scenario.x0.astype(float), scenario.y0.astype(float))
    trace = StrategyTrace(seed=seed, scenario_hash=scenario.digest())
    trace.steps.append(TraceStep(0, "defender", None, state.x))
    trace.steps.append(TraceStep(0, "attacker", None, state.y))
    first = check_terminal(state.x, state.y, tol)
    if first.terminal:
        trace.outcome = Outcome("breached", 0, first.breached_nodes)
        return trace
    for _ in range(horizon):
        state, K, F = step(state, defender, attacker, scenario.defender_graph, scenario.attacker_graph, tol)
        if state.status == "forfeit":
            trace.outcome = Outcome("forfeit", state.t, (), state.actor)
            return trace
        trace.steps.append(TraceStep(state.t, "defender", K, state.x))
        trace.steps.append(TraceStep(state.t, "attacker", F, state.y))
        if state.status == "breached":
            trace.outcome = Outcome("breached", state.t, state.nodes)
            return trace
    trace.outcome = Outcome("horizon-reached", state.t)
    return trace


# --- exhaustive integer oracle --------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    winner: str  # "Defender" | "Attacker"
    value: int  # 1 when the attacker forces a breach within the horizon
    breach_time: int | None  # earliest time the attacker can force, under optimal defense
    states: int  # memo entries visited


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _successors_fn(g: DirectedGraph):
    outs = g.out_neighbors
    n = g.node_count

    @lru_cache(maxsize=None)
    def succ(x: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
        per_node = []
        for j in range(n):
            moves = []
            for comp in _compositions(x[j], len(outs[j])):
                v = [0] * n
                for i, c in zip(outs[j], comp):
                    v[i] += c
                moves.append(v)
            per_node.append(moves)
        result = set()
        for combo in itertools.product(*per_node):
            result.add(tuple(int(sum(col)) for col in zip(*combo)))
        return tuple(sorted(result))

    return succ


def _as_int_state(v, name: str) -> tuple[int, ...]:
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise SimulationError(f"{name} must be a nonnegative integer vector")
    return tuple(int(a) for a in arr)


def discrete_minimax_oracle(
    g_d: DirectedGraph,
    g_a: DirectedGraph,
    x0,
    y0,
    horizon: int,
    include_initial: bool = True,
) -> OracleResult:
    """Exact winner of the integer-state game by exhaustive min/max search.

    Moves are integer transportation moves: every node splits its mass among
    its out-edges in every possible way. With ``include_initial`` a breach
    already present at ``t = 0`` counts as an attacker win.
    """
    x = _as_int_state(x0, "x0")
    y = _as_int_state(y0, "y0")
    n = g_d.node_count
    if g_a.node_count != n or len(x) != n or len(y) != n:
        raise SimulationError("dimension mismatch between graphs and states")
    X, Y = sum(x), sum(y)
    if n > ORACLE_CAPS["N"] or X > ORACLE_CAPS["X"] or Y > ORACLE_CAPS["Y"] or horizon > ORACLE_CAPS["horizon"]:
        raise SimulationError(f"instance exceeds oracle caps {ORACLE_CAPS}")
    if X < 1 or Y < 1 or horizon < 1:
        raise SimulationError("totals and horizon must be positive")
    succ_d = _successors_fn(g_d)
    succ_a = _successors_fn(g_a)

    def breached(a, b) -> bool:
        return any(bi > ai for ai, bi in zip(a, b))

    @lru_cache(maxsize=None)
    def forced(k: int, xs, ys) -> int | None:
        """Steps the attacker needs to force a breach from here, ``None`` if it cannot within ``k``."""
        if k == 0:
            return None
        worst = 0  # defender maximizes the attacker's time, None beats any number
        for xn in succ_d(xs):
            best = None  # attacker minimizes
            for yn in succ_a(ys):
                if breached(xn, yn):
                    best = 1
                    break
                sub = forced(k - 1, xn, yn)
                if sub is not None and (best is None or sub + 1 < best):
                    best = sub + 1
            if best is None:
                return None
            worst = max(worst, best)
        return worst

    if include_initial and breached(x, y):
        return OracleResult("Attacker", 1, 0, 0)
    t = forced(horizon, x, y)
    states = forced.cache_info().currsize
    if t is None:
        return OracleResult("Defender", 0, None, states)
    return OracleResult("Attacker", 1, t, states)
