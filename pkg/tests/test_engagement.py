import itertools

import numpy as np
import pytest

from dynblotto.actions import enumerate_extreme_actions
from dynblotto.engagement import (
    ConsistencyError,
    EngagementError,
    attacker_breach_response,
    breach_response_matrix,
    check_terminal,
    degenerate_attacker_strategy,
    regime_report,
    required_set,
    required_vector,
    required_vector_from_graph,
    safe_set,
)
from dynblotto.graph import build_graph, degree_profile, diameter
from dynblotto.polytope import contains_point
from dynblotto.reachability import reach_point

from conftest import chord4, cycle, random_strong_graph


def test_terminal_ties_favor_defender():
    assert not check_terminal([1.0, 2.0], [1.0, 2.0]).terminal
    assert check_terminal([1.0, 0.0], [0.0, 1.0]).breached_nodes == (2,)
    assert not check_terminal([1.0, 0.0], [1.0 + 1e-12, 0.0]).terminal
    with pytest.raises(EngagementError):
        check_terminal([1.0], [1.0, 0.0])


def test_short_entry_node_is_listed():
    # defender leaves node 2 one unit short
    v = check_terminal([3.0, 1.0], [1.0, 2.0])
    assert v.breached_nodes == (2,) and v.terminal


def test_required_vector_examples(ext3):
    assert required_vector([1.0, 0, 0], ext3).tolist() == [1, 1, 0]
    assert required_set([0.5, 0.5, 0.0], ext3).bounds.tolist() == [0.5, 1.0, 0.5]
    for y in np.random.default_rng(0).dirichlet(np.ones(3), size=10):
        assert required_vector(y, ext3).sum() == pytest.approx(2.0)


def test_required_vector_zero_coordinate():
    # nothing feeds node 3 from the support of y
    g = build_graph(3, [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (3, 1)])
    ext = enumerate_extreme_actions(g)
    assert required_vector([1.0, 0, 0], ext)[2] == 0.0


def test_required_set_rejects_zero(ext3):
    with pytest.raises(EngagementError):
        required_set([0.0, 0.0, 0.0], ext3)


def test_required_vector_two_ways_agree(rng):
    for _ in range(100):
        g = random_strong_graph(rng, int(rng.integers(1, 6)), self_loops=bool(rng.random() < 0.5))
        ext = enumerate_extreme_actions(g)
        y = rng.dirichlet(np.ones(g.node_count)) * rng.uniform(0.1, 5)
        by_vertex = ext.images(y).max(axis=0)
        assert np.max(np.abs(by_vertex - required_vector_from_graph(y, g))) <= 1e-9
        assert np.allclose(required_vector(y, ext), by_vertex)


def test_required_vector_consistency_guard(ext3):
    class Broken:
        graph = ext3.graph

        @staticmethod
        def images(y):
            return np.zeros((1, 3))

    with pytest.raises(ConsistencyError):
        required_vector([1.0, 0, 0], Broken)


def test_required_total_bounds(rng):
    for _ in range(40):
        g = random_strong_graph(rng, int(rng.integers(2, 6)))
        ext = enumerate_extreme_actions(g)
        prof = degree_profile(g)
        Y = rng.uniform(0.5, 3)
        y = rng.dirichlet(np.ones(g.node_count)) * Y
        total = required_vector(y, ext).sum()
        assert prof.d_plus_min * Y - 1e-9 <= total <= prof.d_plus_max * Y + 1e-9
        lo = prof.out_degrees.index(prof.d_plus_min)
        hi = prof.out_degrees.index(prof.d_plus_max)
        assert required_vector(Y * np.eye(g.node_count)[lo], ext).sum() == pytest.approx(prof.d_plus_min * Y)
        assert required_vector(Y * np.eye(g.node_count)[hi], ext).sum() == pytest.approx(prof.d_plus_max * Y)


def test_membership_in_required_set_is_componentwise(rng, ext3, c3):
    for _ in range(100):
        y = rng.dirichlet(np.ones(3))
        x = rng.dirichlet(np.ones(3)) * rng.uniform(1, 3)
        A = c3.adjacency
        by_sum = all(x[i] >= sum(y[j] for j in range(3) if A[i, j]) for i in range(3))
        # dominating every one-step attacker image is the same test
        by_images = bool(np.all(ext3.images(y) <= x[None, :] + 1e-12))
        assert by_sum == by_images


def test_safe_set_examples(ext3):
    v = safe_set([1.0, 1.0, 0.0], [1.0, 0, 0], ext3, ext3)
    assert v.nonempty and v.witness.tolist() == pytest.approx([1.0, 1.0, 0.0])
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.dirichlet(np.ones(3)) * 1.5
        assert not safe_set(x, [1.0, 0, 0], ext3, ext3)
    assert not safe_set([3.0, 0, 0], [0, 1.0, 0], ext3, ext3)


def test_safe_witness_is_reachable_and_guarding(rng):
    for _ in range(40):
        g = random_strong_graph(rng, int(rng.integers(2, 5)))
        ext = enumerate_extreme_actions(g)
        n = g.node_count
        y = rng.dirichlet(np.ones(n))
        x = rng.dirichlet(np.ones(n)) * rng.uniform(1, 2 * n)
        v = safe_set(x, y, ext, ext)
        if v.nonempty:
            assert contains_point(reach_point(x, ext), v.witness, 1e-9)
            assert np.all(v.witness >= v.required - 1e-9)
            assert v.surplus >= -1e-9


def test_breach_examples(ext3):
    assert attacker_breach_response([1.0, 1.0, 0.0], [1.0, 0, 0], ext3) is None
    assert attacker_breach_response([1.0, 0.5, 0.5], [1.0, 0, 0], ext3).tolist() == [0, 1, 0]
    assert attacker_breach_response([0.5, 1.0, 0.4], [0.5, 0.5, 0], ext3).tolist() == [0, 0.5, 0.5]


def test_breach_response_is_extreme_and_breaches(rng):
    for _ in range(40):
        g = random_strong_graph(rng, int(rng.integers(2, 6)))
        ext = enumerate_extreme_actions(g)
        n = g.node_count
        y = rng.dirichlet(np.ones(n))
        x = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 3)
        F = breach_response_matrix(x, y, ext)
        if F is None:
            assert np.all(x >= required_vector(y, ext) - 1e-9)
            continue
        assert any(np.array_equal(F, K) for K in ext.matrices)
        assert check_terminal(x, F @ y).terminal


def test_empty_safe_set_means_every_reply_is_breached():
    for g in (cycle(3), build_graph(2, [(1, 1), (1, 2), (2, 1), (2, 2)]), chord4()):
        ext = enumerate_extreme_actions(g)
        n = g.node_count
        for X in range(1, 5):
            for x in itertools.product(range(X + 1), repeat=n):
                if sum(x) != X:
                    continue
                for y in (np.eye(n)[0], np.eye(n)[-1], np.full(n, 1.0 / n)):
                    if safe_set(np.array(x, float), y, ext, ext, canonical=False):
                        continue
                    for v in reach_point(np.array(x, float), ext).vertices:
                        assert attacker_breach_response(v, y, ext) is not None


def test_regime_examples(c3):
    rep = regime_report(chord4(), 2.5, 1.0)
    assert rep.degenerate_attacker_win and not rep.nontrivial
    rep = regime_report(c3, 2.0, 1.0)
    assert rep.nontrivial and (rep.x_req_lower, rep.x_req_upper) == (2.0, 2.0)
    assert not regime_report(chord4(), 3.0, 1.0).degenerate_attacker_win
    with pytest.raises(EngagementError):
        regime_report(build_graph(2, [(1, 1), (1, 2), (2, 2)]), 1.0, 1.0)
    with pytest.raises(EngagementError):
        regime_report(c3, 0.0, 1.0)
    assert set(rep.to_json()) >= {"x_req_lower", "x_req_upper", "degenerate_attacker_win", "nontrivial"}


def test_degenerate_plan_concentrates():
    g = chord4()
    ext = enumerate_extreme_actions(g)
    assert degenerate_attacker_strategy(g, [1.0, 0, 0, 0]) == []
    plan = degenerate_attacker_strategy(g, [0.5, 0.5, 0, 0], X=2.5)
    assert len(plan) <= 2 * diameter(g)
    y = np.array([0.5, 0.5, 0, 0])
    for F in plan:
        y = F @ y
    assert y.tolist() == [1.0, 0, 0, 0]
    assert required_vector(y, ext).sum() == pytest.approx(3.0)


def test_degenerate_plan_via_hub():
    # the max-degree node 1 has no self-loop, so mass gathers at node 2 then walks over
    g = build_graph(4, [(1, 2), (1, 3), (1, 4), (2, 2), (2, 1), (3, 1), (4, 1)])
    plan = degenerate_attacker_strategy(g, [0.25, 0.25, 0.25, 0.25])
    y = np.array([0.25] * 4)
    for F in plan:
        y = F @ y
    assert y.tolist() == [1.0, 0, 0, 0]
    assert len(plan) <= 2 * diameter(g)


def test_degenerate_plan_checks_premises(c3):
    with pytest.raises(EngagementError):
        degenerate_attacker_strategy(c3, [1.0, 0, 0], X=2.0)
    with pytest.raises(EngagementError):
        degenerate_attacker_strategy(build_graph(2, [(1, 2), (2, 1)]), [1.0, 0])
