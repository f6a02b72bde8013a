import json

import numpy as np
import pytest

from dynblotto.actions import CapacityError, enumerate_extreme_actions
from dynblotto.graph import build_graph, shortest_path_lengths
from dynblotto.polytope import Polytope, PolytopeError, contains_point, point, same_set
from dynblotto.reachability import (
    EXCEEDS_CAP,
    UNREACHABLE,
    cascade,
    dump_flow,
    reach_point,
    reach_polytope,
    ss_time,
)

from conftest import cycle, five_node, random_strong_graph


def _vset(p):
    return sorted(tuple(np.round(v, 12)) for v in p.vertices)


def test_reach_from_unit_mass(ext3):
    assert _vset(reach_point([1.0, 0, 0], ext3)) == [(0, 1, 0), (1, 0, 0)]


def test_reach_with_only_self_loop():
    g = build_graph(3, [(1, 1), (2, 2), (2, 3), (3, 3), (3, 1)])
    ext = enumerate_extreme_actions(g)
    assert _vset(reach_point([4.0, 0, 0], ext)) == [(4, 0, 0)]


def test_reach_four_vertices(ext3):
    assert _vset(reach_point([2.0, 1, 0], ext3)) == sorted([(2, 1, 0), (2, 0, 1), (0, 3, 0), (0, 2, 1)])


def test_reach_polytope_examples(ext3):
    x = np.array([2.0, 1.0, 0.0])
    assert same_set(reach_polytope(point(x), ext3), reach_point(x, ext3))
    d = Polytope(np.array([[1.0, 0, 0], [0, 1.0, 0]]), 1.0)
    assert _vset(reach_polytope(d, ext3)) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]
    simplex = Polytope(np.eye(3), 1.0)
    assert same_set(reach_polytope(simplex, ext3), simplex)


def test_reach_point_shape_check(ext3):
    with pytest.raises(PolytopeError):
        reach_point([1.0, 0.0], ext3)


def test_cascade_examples(ext3):
    assert len(cascade(point([1.0, 0, 0]), ext3, 0)) == 1
    flow = cascade(point([1.0, 0, 0]), ext3, 2)
    assert same_set(flow.stages[2], Polytope(np.eye(3), 1.0))
    flow = cascade(point([2.0, 1, 0]), ext3, 1)
    assert _vset(flow.stages[1]) == sorted([(2, 1, 0), (2, 0, 1), (0, 3, 0), (0, 2, 1)])
    with pytest.raises(ValueError):
        cascade(point([1.0, 0, 0]), ext3, -1)


def test_cascade_invariants(rng):
    for _ in range(6):
        g = random_strong_graph(rng, int(rng.integers(2, 5)))
        ext = enumerate_extreme_actions(g)
        x = rng.dirichlet(np.ones(g.node_count)) * 3
        flow = cascade(point(x), ext, 3)
        assert len(flow.stages[0]) == 1
        for t, stage in enumerate(flow.stages):
            assert np.allclose(stage.vertices.sum(axis=1), 3.0, atol=1e-9)
            if t:
                # identity is available, so stages only grow
                for v in flow.stages[t - 1].vertices:
                    assert contains_point(stage, v)


def test_cascade_saturates(ext3):
    flow = cascade(point([3.0, 0, 0]), ext3, 5)
    assert same_set(flow.stages[2], flow.stages[3])
    assert same_set(flow.stages[3], flow.stages[5])


def test_ss_time_examples(ext3):
    assert ss_time([1.0, 0, 0], [1.0, 0, 0], ext3) == 0
    assert ss_time([1.0, 0, 0], [0, 0, 1.0], ext3) == 2


def test_ss_time_five_node_layout():
    ext = enumerate_extreme_actions(five_node())
    assert ss_time([1.0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0], ext) == 1
    assert ss_time([1.0, 1, 0, 0, 1], [0, 1.0, 1, 1, 0], ext) == 2


def test_ss_time_cap_and_unreachable():
    ext = enumerate_extreme_actions(cycle(5))
    assert ss_time([1.0, 0, 0, 0, 0], [0, 0, 0, 0, 1.0], ext, t_cap=2) == EXCEEDS_CAP
    # node 2 drains into node 3 and never returns
    g = build_graph(3, [(1, 1), (1, 2), (2, 3), (3, 3)])
    ext = enumerate_extreme_actions(g)
    assert ss_time([0, 0, 1.0], [1.0, 0, 0], ext) == UNREACHABLE
    with pytest.raises(PolytopeError):
        ss_time([1.0, 0, 0], [2.0, 0, 0], ext)


def test_ss_time_matches_bfs_on_concentrated_states(rng):
    graphs = [cycle(3), cycle(4), five_node()] + [random_strong_graph(rng, int(rng.integers(2, 6))) for _ in range(4)]
    for g in graphs:
        ext = enumerate_extreme_actions(g)
        D = shortest_path_lengths(g)
        n = g.node_count
        for a in range(n):
            for b in range(n):
                assert ss_time(np.eye(n)[a], np.eye(n)[b], ext) == D[a, b]


def test_vertex_cap(ext3):
    with pytest.raises(CapacityError):
        reach_polytope(point([2.0, 1, 0]), ext3, vertex_cap=2)


def test_dump_flow(tmp_path, ext3):
    flow = cascade(point([1.0, 0, 0]), ext3, 2)
    meta_path = dump_flow(flow, tmp_path)
    meta = json.loads(meta_path.read_text())
    assert meta["vertex_counts"] == [1, 2, 3]
    assert len(meta["wall_clock"]) == 3
    assert (tmp_path / "stage_002.csv").exists()
