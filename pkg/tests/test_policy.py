import numpy as np
import pytest

from dynblotto.actions import NotReachable, enumerate_extreme_actions, is_admissible, random_admissible
from dynblotto.engagement import safe_set
from dynblotto.polytope import LowerBoundSet, Polytope, contains_point, max_min_surplus, point
from dynblotto.policy import (
    ExtractionError,
    attacker_plan_to,
    back_prop,
    extract_defender_strategy,
    propagate_safe_flow,
)
from dynblotto.reachability import reach_point, reach_polytope
from dynblotto.simulator import GreedyBreachAttacker, PlanPolicy, HoldPolicy, RandomPolicy, run

from conftest import chord4, cycle, five_node, random_strong_graph, scenario


def test_back_prop_identity(ext3):
    res = back_prop(point([1.0, 2.0, 0.5]), [1.0, 2.0, 0.5], ext3)
    assert np.allclose(res.action, np.eye(3))


def test_back_prop_transport(ext3):
    res = back_prop(point([2.0, 1.0, 0.0]), [1.0, 2.0, 0.0], ext3)
    assert res.predecessor_state.tolist() == [2.0, 1.0, 0.0]
    expected = np.array([[0.5, 0, 0], [0.5, 1, 0], [0, 0, 1]])
    assert np.allclose(res.action, expected, atol=1e-12)


def test_back_prop_nonunique(two_node):
    ext = enumerate_extreme_actions(two_node)
    d = Polytope(np.eye(2), 1.0)
    res = back_prop(d, [0.25, 0.75], ext)
    assert is_admissible(res.action, two_node)
    assert np.max(np.abs(res.action @ res.predecessor_state - [0.25, 0.75])) <= 1e-9
    assert contains_point(d, res.predecessor_state)


def test_back_prop_unreachable(ext3):
    with pytest.raises(NotReachable):
        back_prop(point([1.0, 0, 0]), [0, 0, 1.0], ext3)


def test_back_prop_random_targets(rng):
    for g in (cycle(3), chord4(), five_node(), random_strong_graph(rng, 4)):
        ext = enumerate_extreme_actions(g)
        n = g.node_count
        d = reach_point(rng.dirichlet(np.ones(n)) * 2, ext)
        for _ in range(50):
            # a reachable target: random point of d pushed through a random admissible matrix
            src = rng.dirichlet(np.ones(len(d))) @ d.vertices
            target = random_admissible(g, rng, 0.3) @ src
            res = back_prop(d, target, ext)
            assert is_admissible(res.action, g, 1e-9)
            assert np.max(np.abs(res.action @ res.predecessor_state - target)) <= 1e-9
            assert contains_point(d, res.predecessor_state, 1e-9)
            assert np.allclose(res.psi.sum(axis=1), res.theta, atol=1e-12)
            assert np.allclose(res.psi.sum(axis=0), res.lambda_, atol=1e-12)
            assert res.theta.sum() == pytest.approx(1.0)


def test_flow_truncates_without_enough_mass(c3, ext3):
    flow = propagate_safe_flow(c3, c3, [1.5, 0, 0], [1.0, 0, 0], 4)
    assert flow.truncation == 1
    with pytest.raises(ExtractionError):
        extract_defender_strategy(flow, ext3)


def test_flow_horizon_one_matches_safe_set(c3, ext3, rng):
    for _ in range(20):
        x = rng.dirichlet(np.ones(3)) * rng.uniform(1.5, 3)
        y = rng.dirichlet(np.ones(3))
        flow = propagate_safe_flow(c3, c3, x, y, 1, ext3, ext3)
        verdict = safe_set(x, y, ext3, ext3)
        assert (flow.truncation is None) == verdict.nonempty
        if verdict.nonempty:
            assert contains_point(flow.defender_safe[1], verdict.witness, 1e-8)


def test_tight_cycle_open_loop_flow_truncates(c3, ext3):
    # after two attacker steps every node can hold the whole attacker mass, so an
    # open-loop defender needs 3 units on the 3-cycle even though 2 suffice in closed loop
    flow = propagate_safe_flow(c3, c3, [1.0, 1.0, 0.0], [1.0, 0, 0], 10)
    assert flow.truncation == 2
    assert flow.required[2].tolist() == [1.0, 1.0, 1.0]


def test_flow_stages_are_consistent(rng):
    g = chord4()
    ext = enumerate_extreme_actions(g)
    flow = propagate_safe_flow(g, g, [1.0, 1, 1, 1], [1.0, 0, 0, 0], 4, ext, ext)
    assert flow.truncation is None and flow.horizon == 4
    for t in range(1, 5):
        assert np.allclose(flow.required[t], flow.attacker_reach[t].vertices.max(axis=0))
        for v in flow.defender_safe[t].vertices:
            assert contains_point(flow.defender_reach[t], v, 1e-8)
            assert np.all(v >= flow.required[t] - 1e-9)


def test_extraction_on_three_cycle(c3, ext3):
    flow = propagate_safe_flow(c3, c3, [2.0, 1.0, 0.0], [1.0, 0, 0], 5, ext3, ext3)
    trace = extract_defender_strategy(flow, ext3)
    mats = trace.matrices("defender")
    assert len(mats) == 5
    assert all(is_admissible(K, c3, 1e-9) for K in mats)
    for t, x in enumerate(trace.states("defender")):
        assert contains_point(flow.defender_safe[t], x, 1e-8)
    assert trace.consistency_error() <= 1e-9
    sc = scenario(c3, [2.0, 1.0, 0.0], [1.0, 0, 0], horizon=5)
    for seed in range(200):
        attacker = RandomPolicy(c3) if seed % 2 else GreedyBreachAttacker(ext3, RandomPolicy(c3))
        out = run(sc, PlanPolicy(mats, HoldPolicy(c3)), attacker, seed=seed)
        assert out.outcome.status == "horizon-reached"


def test_extraction_single_step_matches_witness(c3, ext3):
    x0, y0 = [1.0, 1.0, 1.0], [1.0, 0, 0]
    flow = propagate_safe_flow(c3, c3, x0, y0, 1, ext3, ext3)
    trace = extract_defender_strategy(flow, ext3)
    x1 = trace.states("defender")[1]
    assert contains_point(flow.defender_safe[1], x1, 1e-9)
    verdict = safe_set(x0, y0, ext3, ext3)
    assert np.min(x1 - verdict.required) == pytest.approx(verdict.surplus, abs=1e-9)


def test_attacker_plan_to(ext3):
    plan = attacker_plan_to([1.0, 0, 0], [0, 0, 1.0], 2, ext3)
    y = np.array([1.0, 0, 0])
    for F in plan:
        assert is_admissible(F, ext3.graph)
        y = F @ y
    assert np.allclose(y, [0, 0, 1])
    with pytest.raises(NotReachable):
        attacker_plan_to([1.0, 0, 0], [0, 0, 1.0], 1, ext3)
