import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lossyavg import topology as tp


def test_generators_edge_counts():
    assert len(tp.make_complete(6).edges) == 15
    assert len(tp.make_star(6).edges) == 5
    assert len(tp.make_ring(6).edges) == 6
    assert len(tp.make_path(6).edges) == 5


def test_star_hub_is_first_node():
    t = tp.make_star(5)
    assert t.degree(0) == 4
    assert all(t.degree(k) == 1 for k in range(1, 5))


def test_edges_are_normalised():
    t = tp.Topology.from_edges(3, [(2, 0), (1, 2)])
    assert t.sorted_edges() == [(0, 2), (1, 2)]
    assert t.has_edge(2, 0) and t.has_edge(0, 2)


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1), (1, 0)]])
def test_bad_edges_rejected(edges):
    with pytest.raises(tp.TopologyError):
        tp.Topology.from_edges(3, edges)


def test_unknown_generator():
    with pytest.raises(tp.TopologyError):
        tp.make("hypercube", 4)


def test_connectivity_and_trees():
    assert tp.is_connected(tp.make_path(7))
    assert tp.is_tree(tp.make_star(7))
    assert not tp.is_tree(tp.make_ring(7))
    split = tp.Topology.from_edges(4, [(0, 1), (2, 3)])
    assert not tp.is_connected(split)
    with pytest.raises(tp.TopologyError):
        tp.require_connected(split)


def test_adjacency_is_symmetric_without_loops():
    a = tp.make_ring(5).adjacency()
    assert (a == a.T).all()
    assert not a.diagonal().any()


def test_edge_list_round_trip(tmp_path):
    t = tp.make_ring(5)
    path = tmp_path / "ring.txt"
    tp.save(t, path)
    assert path.read_text().splitlines()[:2] == ["5", "1 2"]
    assert tp.load(path) == t


def test_edge_list_comments_and_errors():
    t = tp.parse("# tiny\n3\n1 2\n\n2 3\n")
    assert t.sorted_edges() == [(0, 1), (1, 2)]
    for bad in ["", "3 4\n1 2\n", "3\n2 1\n", "3\n1 x\n", "3\n1 2 3\n"]:
        with pytest.raises(tp.TopologyError):
            tp.parse(bad)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(2, 25), p=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
def test_random_connected_is_connected(m, p, seed):
    t = tp.random_connected(m, p, np.random.default_rng(seed))
    assert t.m == m
    assert tp.is_connected(t)
    assert len(t.edges) >= m - 1
