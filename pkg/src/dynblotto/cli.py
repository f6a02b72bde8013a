"""``dynblotto`` command-line tool.

Every subcommand reads one scenario file. Reports go to stdout as JSON; set
dumps and traces go under ``--out-dir``.

Exit codes: 0 analysis complete or defender-favorable, 2 attacker certificate,
3 degenerate regime, 64 usage, 65 data error, 70 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import lp, tolerance
from .actions import CapacityError, enumerate_extreme_actions
from .engagement import ConsistencyError, degenerate_attacker_strategy, regime_report, safe_set
from .graph import diameter, is_strongly_connected
from .policy import ExtractionError, extract_defender_strategy, propagate_safe_flow
from .polytope import dump_polytope
from .reachability import ReachabilityFlow, dump_flow, reach_point, ss_time
from .scenario import Scenario, parse_scenario
from .simulator import (
    CycleDefender,
    GreedyBreachAttacker,
    HoldPolicy,
    MaxMinSurplusDefender,
    PlanPolicy,
    RandomPolicy,
    degenerate_attacker,
    discrete_minimax_oracle,
    run,
)
from .synthesis import CycleError, attacker_winning_graph_search, cycle_order, cycle_winning_region, open_loop_attacker_search
from .trace import StrategyTrace

EXIT_OK = 0
EXIT_ATTACKER = 2
EXIT_DEGENERATE = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_INTERNAL = 70

log = logging.getLogger("dynblotto")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def _vec(text: str) -> np.ndarray:
    try:
        return np.array([float(a) for a in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _out_dir(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dump_dir(args) -> Path:
    p = Path(args.dump_sets)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _samples(args) -> dict:
    spec = {"mode": args.samples}
    if args.resolution is not None:
        spec["resolution"] = args.resolution
    return spec


def _load(args) -> Scenario:
    sc = parse_scenario(args.scenario)
    if sc.tolerance is not None:
        tolerance.EPS = float(sc.tolerance)
    for note in sc.notes:
        log.warning("%s", note)
    return sc


# --- subcommands ------------------------------------------------------------


def cmd_analyze(args) -> int:
    sc = _load(args)
    ext_d = enumerate_extreme_actions(sc.defender_graph)
    ext_a = enumerate_extreme_actions(sc.attacker_graph)
    report: dict = {"scenario_hash": sc.digest(), "notes": sc.notes}
    if is_strongly_connected(sc.defender_graph):
        report["regime"] = regime_report(sc.defender_graph, sc.X, sc.Y).to_json()
    else:
        report["regime"] = None
        report["notes"].append("defender graph is not strongly connected; regime classification skipped")
    verdict = safe_set(sc.x0, sc.y0, ext_d, ext_a)
    report["safe_set"] = {
        "nonempty": verdict.nonempty,
        "witness": verdict.witness,
        "required": verdict.required,
        "surplus": verdict.surplus,
    }
    try:
        cycle_order(sc.defender_graph)
        report["cycle_winner"] = cycle_winning_region(sc.x0, sc.y0, ext_d, ext_a)
    except CycleError as exc:
        report["cycle_winner"] = None
        report["cycle_note"] = str(exc)
    if args.dump_sets:
        out = _dump_dir(args)
        dump_polytope(reach_point(sc.x0, ext_d), out / "defender_reach.csv")
        dump_polytope(reach_point(sc.y0, ext_a), out / "attacker_reach.csv")
    _emit(report)
    return EXIT_OK


def cmd_check_degenerate(args) -> int:
    sc = _load(args)
    rep = regime_report(sc.defender_graph, sc.X, sc.Y)
    out = {"regime": rep.to_json()}
    if rep.degenerate_attacker_win:
        plan = degenerate_attacker_strategy(sc.attacker_graph, sc.y0)
        out["attacker_plan"] = [F.tolist() for F in plan]
        out["breach_bound"] = 2 * diameter(sc.attacker_graph) + 1
        _emit(out)
        return EXIT_DEGENERATE
    _emit(out)
    return EXIT_OK


def cmd_ss_time(args) -> int:
    sc = _load(args)
    if args.actor == "defender":
        g, start = sc.defender_graph, sc.x0
    else:
        g, start = sc.attacker_graph, sc.y0
    if args.start is not None:
        start = args.start
    ext = enumerate_extreme_actions(g)
    tau = ss_time(start, args.goal, ext, t_cap=args.t_cap)
    _emit({"actor": args.actor, "start": start, "goal": args.goal, "tau": tau})
    return EXIT_OK


def _certificate_exit(cert, args) -> int:
    if cert is None:
        _emit({"certificate": None, "note": "no sampled certificate found; this is not a defender guarantee"})
        return EXIT_OK
    body = cert.to_json()
    _emit({"certificate": body})
    if args.out_dir:
        (_out_dir(args) / "certificate.json").write_text(json.dumps(body, indent=2))
    return EXIT_ATTACKER


def cmd_attacker_graph(args) -> int:
    sc = _load(args)
    cert = attacker_winning_graph_search(
        sc.defender_graph, sc.attacker_graph, sc.X, sc.Y, samples=_samples(args), t_cap=args.t_cap
    )
    return _certificate_exit(cert, args)


def cmd_open_loop(args) -> int:
    sc = _load(args)
    cert = open_loop_attacker_search(
        sc.defender_graph, sc.attacker_graph, sc.x0, sc.y0, args.t_max, samples=_samples(args)
    )
    return _certificate_exit(cert, args)


def cmd_extract_defender(args) -> int:
    sc = _load(args)
    horizon = args.horizon or sc.horizon
    ext_d = enumerate_extreme_actions(sc.defender_graph)
    ext_a = enumerate_extreme_actions(sc.attacker_graph)
    flow = propagate_safe_flow(sc.defender_graph, sc.attacker_graph, sc.x0, sc.y0, horizon, ext_d, ext_a)
    if args.dump_sets:
        out = _dump_dir(args)
        dump_flow(ReachabilityFlow(flow.defender_safe, ext_d), out, prefix="defender_safe")
        dump_flow(ReachabilityFlow(flow.attacker_reach, ext_a), out, prefix="attacker_reach")
    if flow.truncation is not None:
        _emit({"extracted": False, "safe_set_empty_at": flow.truncation, "vertex_counts": [len(d) for d in flow.defender_safe]})
        return EXIT_OK
    trace = extract_defender_strategy(flow, ext_d)
    trace.scenario_hash = sc.digest()
    body = trace.to_json()
    if args.out_dir:
        (_out_dir(args) / "defender_trace.json").write_text(json.dumps(body, indent=2))
    _emit({"extracted": True, "vertex_counts": [len(d) for d in flow.defender_safe], "trace": body})
    return EXIT_OK


def _defender(name: str, sc: Scenario, ext_d, ext_a):
    if name == "hold":
        return HoldPolicy(sc.defender_graph)
    if name == "random":
        return RandomPolicy(sc.defender_graph)
    if name == "maxmin":
        return MaxMinSurplusDefender(ext_d, ext_a)
    if name == "cycle":
        return CycleDefender(ext_d, ext_a)
    if name == "extracted":
        flow = propagate_safe_flow(sc.defender_graph, sc.attacker_graph, sc.x0, sc.y0, sc.horizon, ext_d, ext_a)
        trace = extract_defender_strategy(flow, ext_d)
        return PlanPolicy(trace.matrices("defender"), MaxMinSurplusDefender(ext_d, ext_a))
    raise ValueError(f"unknown defender policy {name!r}")


def _attacker(name: str, sc: Scenario, ext_a):
    if name == "hold":
        return HoldPolicy(sc.attacker_graph)
    if name == "random":
        return RandomPolicy(sc.attacker_graph)
    if name == "greedy":
        return GreedyBreachAttacker(ext_a, RandomPolicy(sc.attacker_graph))
    if name == "degenerate":
        return degenerate_attacker(ext_a, sc.y0)
    raise ValueError(f"unknown attacker policy {name!r}")


def cmd_simulate(args) -> int:
    sc = _load(args)
    ext_d = enumerate_extreme_actions(sc.defender_graph)
    ext_a = enumerate_extreme_actions(sc.attacker_graph)
    trace = run(sc, _defender(args.defender, sc, ext_d, ext_a), _attacker(args.attacker, sc, ext_a), args.horizon, args.seed)
    body = trace.to_json()
    body["policies"] = {"defender": args.defender, "attacker": args.attacker}
    if args.out_dir:
        (_out_dir(args) / "trace.json").write_text(json.dumps(body, indent=2))
    _emit(body)
    return EXIT_OK


def cmd_replay(args) -> int:
    sc = _load(args)
    obj = json.loads(Path(args.trace).read_text())
    trace = StrategyTrace.from_json(obj)
    if trace.scenario_hash != sc.digest():
        _emit({"replayed": False, "reason": "scenario hash mismatch", "expected": trace.scenario_hash, "actual": sc.digest()})
        return EXIT_DATA
    d_plan = PlanPolicy(trace.matrices("defender"), HoldPolicy(sc.defender_graph))
    a_plan = PlanPolicy(trace.matrices("attacker"), HoldPolicy(sc.attacker_graph))
    horizon = len(trace.matrices("defender"))
    again = run(sc, d_plan, a_plan, horizon, trace.seed or 0)
    same = len(again.steps) == len(trace.steps) and all(
        np.allclose(a.state, b.state, atol=10 * tolerance.EPS) for a, b in zip(again.steps, trace.steps)
    )
    same = same and again.outcome.status == trace.outcome.status and again.outcome.nodes == trace.outcome.nodes
    _emit({"replayed": True, "matches": bool(same), "outcome": again.outcome.to_json()})
    return EXIT_OK if same else EXIT_DATA


def cmd_oracle(args) -> int:
    sc = _load(args)
    horizon = args.horizon or sc.horizon
    res = discrete_minimax_oracle(
        sc.defender_graph, sc.attacker_graph, sc.x0, sc.y0, horizon, include_initial=not args.skip_initial
    )
    _emit({"winner": res.winner, "value": res.value, "breach_time": res.breach_time, "states": res.states})
    return EXIT_ATTACKER if res.winner == "Attacker" else EXIT_OK


# --- wiring -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dynblotto", description="Dynamic defender-attacker Blotto games on directed graphs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("scenario", help="scenario JSON file")
        sp.add_argument("--out-dir", help="directory for dumps, traces and certificates")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("analyze", cmd_analyze, "regime, safe set and cycle verdict for the initial state")
    sp.add_argument("--dump-sets", metavar="DIR", help="write one-step reachable sets as CSV into DIR")

    add("check-degenerate", cmd_check_degenerate, "exit 3 with a concentration plan when the attacker wins by degree alone")

    sp = add("ss-time", cmd_ss_time, "fewest steps between two exact states")
    sp.add_argument("--goal", type=_vec, required=True, help="goal state, comma-separated")
    sp.add_argument("--start", type=_vec, help="start state (default: the scenario's initial state)")
    sp.add_argument("--actor", choices=("defender", "attacker"), default="defender")
    sp.add_argument("--t-cap", type=int, help="give up after this many steps (default 4N)")

    for name, fn, help_ in (
        ("attacker-graph", cmd_attacker_graph, "search sampled attacker pairs for a graph-level win"),
        ("open-loop", cmd_open_loop, "search for an attacker win from the scenario's initial state"),
    ):
        sp = add(name, fn, help_)
        sp.add_argument("--samples", choices=("default", "concentrated", "integer", "mesh"), default="default")
        sp.add_argument("--resolution", type=float, help="mesh step (absolute mass)")
        if name == "attacker-graph":
            sp.add_argument("--t-cap", type=int, help="largest attacker state-to-state time tried (default 4N)")
        else:
            sp.add_argument("--t-max", type=int, default=5, help="search steps (default 5)")

    sp = add("extract-defender", cmd_extract_defender, "propagate safe sets and extract an open-loop defender trace")
    sp.add_argument("--horizon", type=int, help="override the scenario horizon")
    sp.add_argument("--dump-sets", metavar="DIR", help="write every safe stage as CSV into DIR")

    sp = add("simulate", cmd_simulate, "play the game with the chosen policies")
    sp.add_argument("--defender", choices=("hold", "random", "maxmin", "cycle", "extracted"), default="maxmin")
    sp.add_argument("--attacker", choices=("hold", "random", "greedy", "degenerate"), default="greedy")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, help="override the scenario horizon")

    sp = add("replay", cmd_replay, "re-run a recorded trace after checking its scenario hash")
    sp.add_argument("trace", help="trace JSON written by simulate")

    sp = add("oracle", cmd_oracle, "exhaustive integer minimax (N<=4, X<=6, Y<=3, horizon<=4)")
    sp.add_argument("--horizon", type=int, help="override the scenario horizon")
    sp.add_argument("--skip-initial", action="store_true", help="ignore a breach already present at t=0")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not getattr(args, "fn", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    saved_eps = tolerance.EPS
    try:
        return args.fn(args)
    except (CapacityError, ConsistencyError, ExtractionError, lp.LPError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        tolerance.EPS = saved_eps


if __name__ == "__main__":
    sys.exit(main())
