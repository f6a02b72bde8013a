import numpy as np
import pytest

from dynblotto.actions import enumerate_extreme_actions
from dynblotto.graph import build_graph, graph_to_json, is_strongly_connected
from dynblotto.scenario import scenario_from_dict


def loops(n):
    return [(i, i) for i in range(1, n + 1)]


def cycle(n):
    return build_graph(n, loops(n) + [(i, i % n + 1) for i in range(1, n + 1)])


def chord4():
    """4-cycle with self-loops plus the chord 1->3, so node 1 has out-degree 3."""
    return build_graph(4, loops(4) + [(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)])


def five_node():
    """Five-node layout with out-degrees (3,3,2,2,2); node 5 cannot reach {2,3,4} in one hop."""
    return build_graph(5, loops(5) + [(1, 2), (1, 5), (2, 3), (2, 4), (3, 4), (4, 5), (5, 1)])


def seven_node():
    """Ring 1..5 that forks at node 5 into 6 and 7, both returning to 1."""
    return build_graph(7, loops(7) + [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 7), (6, 1), (7, 1)])


def complete(n):
    return build_graph(n, [(j, i) for j in range(1, n + 1) for i in range(1, n + 1)])


def random_strong_graph(rng, n, p=0.4, self_loops=True):
    """Random strongly connected graph: a random Hamiltonian cycle plus extra edges."""
    while True:
        order = rng.permutation(n) + 1
        edges = {(int(order[k]), int(order[(k + 1) % n])) for k in range(n)} if n > 1 else set()
        for j in range(1, n + 1):
            for i in range(1, n + 1):
                if i != j and rng.random() < p:
                    edges.add((j, i))
        if self_loops or n == 1:
            edges |= set(loops(n))
        g = build_graph(n, sorted(edges))
        if is_strongly_connected(g):
            return g


def scenario(g, x0, y0, horizon=10, g_a=None):
    obj = {
        "graph": graph_to_json(g),
        "X": float(np.sum(x0)),
        "Y": float(np.sum(y0)),
        "x0": [float(v) for v in x0],
        "y0": [float(v) for v in y0],
        "horizon": horizon,
    }
    if g_a is not None:
        obj["attacker_graph"] = graph_to_json(g_a)
    return scenario_from_dict(obj)


@pytest.fixture
def c3():
    return cycle(3)


@pytest.fixture
def ext3(c3):
    return enumerate_extreme_actions(c3)


@pytest.fixture
def two_node():
    """Node 1 may keep or pass to node 2; node 2 only keeps."""
    return build_graph(2, [(1, 1), (1, 2), (2, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
