"""Timestamped state/action sequences and their JSON form."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceStep", "Outcome", "StrategyTrace", "scenario_hash"]


@dataclass(frozen=True)
class TraceStep:
    t: int
    actor: str  # "defender" | "attacker"
    matrix: np.ndarray | None  # None for the initial state records
    state: np.ndarray

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "actor": self.actor,
            "matrix": None if self.matrix is None else np.asarray(self.matrix).tolist(),
            "state": np.asarray(self.state).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TraceStep":
        m = obj.get("matrix")
        return cls(int(obj["t"]), str(obj["actor"]), None if m is None else np.array(m, dtype=float), np.array(obj["state"], dtype=float))


@dataclass(frozen=True)
class Outcome:
    status: str  # "guarded" | "breached" | "horizon-reached" | "forfeit"
    time: int | None = None
    nodes: tuple[int, ...] = ()
    actor: str | None = None

    def to_json(self) -> dict:
        return {"status": self.status, "time": self.time, "nodes": list(self.nodes), "actor": self.actor}

    @classmethod
    def from_json(cls, obj: dict) -> "Outcome":
        return cls(obj["status"], obj.get("time"), tuple(obj.get("nodes", ())), obj.get("actor"))


@dataclass
class StrategyTrace:
    steps: list[TraceStep] = field(default_factory=list)
    outcome: Outcome = field(default_factory=lambda: Outcome("horizon-reached"))
    seed: int | None = None
    scenario_hash: str | None = None

    def states(self, actor: str) -> list[np.ndarray]:
        return [s.state for s in self.steps if s.actor == actor]

    def matrices(self, actor: str) -> list[np.ndarray]:
        return [s.matrix for s in self.steps if s.actor == actor and s.matrix is not None]

    def consistency_error(self) -> float:
        """Largest ``|K @ prev - next|`` over consecutive records of each actor."""
        worst = 0.0
        for actor in ("defender", "attacker"):
            seq = [s for s in self.steps if s.actor == actor]
            for prev, nxt in zip(seq, seq[1:]):
                if nxt.matrix is not None:
                    worst = max(worst, float(np.max(np.abs(nxt.matrix @ prev.state - nxt.state))))
        return worst

    def to_json(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "steps": [s.to_json() for s in self.steps],
            "outcome": self.outcome.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StrategyTrace":
        return cls(
            steps=[TraceStep.from_json(s) for s in obj["steps"]],
            outcome=Outcome.from_json(obj["outcome"]),
            seed=obj.get("seed"),
            scenario_hash=obj.get("scenario_hash"),
        )


def scenario_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
