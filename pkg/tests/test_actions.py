import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynblotto.actions import (
    ActionError,
    CapacityError,
    NotReachable,
    decompose,
    enumerate_extreme_actions,
    is_admissible,
    random_admissible,
    recombine,
    synth_action,
)
from dynblotto.graph import build_graph

from conftest import complete, cycle, random_strong_graph


def test_three_cycle_has_eight(ext3):
    assert len(ext3) == 8


def test_single_node_identity():
    ext = enumerate_extreme_actions(build_graph(1, [(1, 1)]))
    assert len(ext) == 1
    assert ext.matrix(0).tolist() == [[1.0]]


def test_two_node_actions(two_node):
    ext = enumerate_extreme_actions(two_node)
    mats = [m.tolist() for m in ext.matrices]
    assert mats == [[[1, 0], [0, 1]], [[0, 0], [1, 1]]]
    assert ext.to_json() == [[1, 2], [2, 2]]


def _count_by_brute_force(g):
    # every 0/1 matrix with unit column sums supported on the edges
    n = g.node_count
    A = g.adjacency
    count = 0
    for rows in itertools.product(range(n), repeat=n):
        if all(A[rows[j], j] for j in range(n)):
            count += 1
    return count


def test_cardinality_by_independent_count(rng):
    for _ in range(15):
        g = random_strong_graph(rng, int(rng.integers(1, 5)))
        ext = enumerate_extreme_actions(g)
        assert len(ext) == _count_by_brute_force(g)
        assert len({tuple(c) for c in ext.choices}) == len(ext)
        for K in ext.matrices:
            assert is_admissible(K, g, 0.0)


def test_enumeration_order_is_lexicographic(c3, ext3):
    assert [tuple(c) for c in ext3.choices] == sorted(tuple(c) for c in ext3.choices)


def test_action_cap():
    with pytest.raises(CapacityError):
        enumerate_extreme_actions(complete(5), cap=1000)
    assert len(enumerate_extreme_actions(complete(5), cap=5**5)) == 5**5


def test_node_without_out_edge():
    with pytest.raises(ActionError):
        enumerate_extreme_actions(build_graph(2, [(1, 2), (1, 1)]))


def test_admissibility_examples(c3, two_node):
    assert is_admissible(np.eye(3), c3)
    bad = np.eye(3)
    bad[0, 0] = 0.9
    assert not is_admissible(bad, c3)
    assert is_admissible([[0.5, 0.0], [0.5, 1.0]], two_node)
    assert not is_admissible([[0.5, 0.5], [0.5, 0.5]], two_node)  # 2 -> 1 is not an edge
    assert not is_admissible([[1.2, 0.0], [-0.2, 1.0]], two_node)
    with pytest.raises(ActionError):
        is_admissible(np.eye(3), two_node)


def test_decompose_identity(ext3):
    lam = decompose(np.eye(3), ext3)
    ident = [l for l in range(len(ext3)) if np.array_equal(ext3.matrix(l), np.eye(3))]
    assert lam[ident[0]] == pytest.approx(1.0)
    assert lam.sum() == pytest.approx(1.0)


def test_decompose_two_node(two_node):
    ext = enumerate_extreme_actions(two_node)
    assert decompose([[0.5, 0.0], [0.5, 1.0]], ext) == pytest.approx([0.5, 0.5])


def test_decompose_rejects_inadmissible(ext3):
    with pytest.raises(ActionError):
        decompose(np.full((3, 3), 0.5), ext3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_decompose_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    g = random_strong_graph(rng, n)
    ext = enumerate_extreme_actions(g)
    K = random_admissible(g, rng, extreme_prob=0.2)
    lam = decompose(K, ext)
    assert np.all(lam >= 0)
    assert abs(lam.sum() - 1.0) <= 1e-9
    assert np.max(np.abs(recombine(lam, ext) - K)) <= 1e-9


def test_recombining_flat_simplex_weights_is_admissible(rng, ext3, c3):
    for _ in range(50):
        lam = rng.dirichlet(np.ones(len(ext3)))
        assert is_admissible(recombine(lam, ext3), c3)


def test_synth_identity(c3):
    assert np.allclose(synth_action([1, 1, 1], [1, 1, 1], c3), np.eye(3))


def test_synth_transport(c3):
    K = synth_action([2, 1, 0], [1, 2, 0], c3)
    expected = np.array([[0.5, 0, 0], [0.5, 1, 0], [0, 0, 1]])
    assert np.allclose(K, expected, atol=1e-12)


def test_synth_unreachable(c3):
    with pytest.raises(NotReachable) as info:
        synth_action([1, 0, 0], [0, 0, 1], c3)
    assert info.value.certificate is not None


def test_synth_mass_mismatch(c3):
    with pytest.raises(NotReachable):
        synth_action([1, 0, 0], [0, 2, 0], c3)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_synth_recovers_random_moves(seed, n):
    rng = np.random.default_rng(seed)
    g = random_strong_graph(rng, n, self_loops=bool(rng.random() < 0.7))
    x = rng.dirichlet(np.ones(n)) * rng.uniform(0.5, 5)
    x[rng.random(n) < 0.3] = 0.0
    if x.sum() == 0:
        x[0] = 1.0
    target = random_admissible(g, rng, 0.3) @ x
    K = synth_action(x, target, g)
    assert is_admissible(K, g, 1e-9)
    assert np.max(np.abs(K @ x - target)) <= 1e-9


def test_random_admissible_is_admissible(rng):
    for _ in range(30):
        g = random_strong_graph(rng, int(rng.integers(1, 6)))
        assert is_admissible(random_admissible(g, rng, 0.5), g)


def test_cardinality_formula_on_cycles():
    for n in range(2, 7):
        assert len(enumerate_extreme_actions(cycle(n))) == math.prod([2] * n)
