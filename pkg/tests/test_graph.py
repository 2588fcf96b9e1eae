import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geonoise.graph import (
    GraphError,
    build_graph,
    from_arrays,
    read_edgelist,
    weighted_degrees,
    write_edgelist,
)


def test_single_edge():
    g = build_graph(3, [(0, 1, 1.0)])
    assert g.num_edges == 1
    assert weighted_degrees(g)[0] == 1.0


def test_reversed_duplicate_keeps_last_weight():
    g = build_graph(2, [(0, 1, 2.0), (1, 0, 3.0)])
    assert g.num_edges == 1
    assert g.weight(0, 1) == 3.0 and g.weight(1, 0) == 3.0


def test_four_cycle_degrees():
    g = build_graph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)])
    assert weighted_degrees(g).tolist() == [2, 2, 2, 2]


def test_degree_examples():
    assert weighted_degrees(build_graph(3, [])).tolist() == [0, 0, 0]
    tri = build_graph(3, [(0, 1, 2), (1, 2, 2), (0, 2, 2)])
    assert weighted_degrees(tri).tolist() == [4, 4, 4]
    path = build_graph(3, [(0, 1, 1), (1, 2, 1)])
    assert weighted_degrees(path).tolist() == [1, 2, 1]


@pytest.mark.parametrize(
    "edges",
    [[(0, 3, 1.0)], [(-1, 0, 1.0)], [(1, 1, 1.0)], [(0, 1, -0.5)], [(0, 1, float("nan"))]],
)
def test_bad_input_rejected(edges):
    with pytest.raises(GraphError):
        build_graph(3, edges)


def test_zero_weight_dropped():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 0.0)])
    assert g.num_edges == 1 and not g.has_edge(1, 2)


def test_accessors():
    g = build_graph(4, [(0, 1, 1.5), (2, 1, 0.5)])
    nb, w = g.neighbors(1)
    assert sorted(zip(nb.tolist(), w.tolist())) == [(0, 1.5), (2, 0.5)]
    assert g.weight(0, 3) == 0.0
    assert g.edge_index(2, 1) is not None and g.edge_index(0, 3) is None
    np.testing.assert_array_equal(g.dense(), g.dense().T)


def test_with_weights_drops_zeros_and_is_new():
    g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    h = g.with_weights([0.0, 2.0])
    assert h.num_edges == 1 and h.weight(1, 2) == 2.0
    assert g.num_edges == 2


def test_edgelist_round_trip_bit_exact(tmp_path, rng):
    w = rng.random(30) * 10 ** rng.uniform(-8, 8, 30)
    iu, ju = np.triu_indices(12, 1)
    pick = rng.choice(iu.size, 30, replace=False)
    g = from_arrays(15, iu[pick], ju[pick], w)
    path = tmp_path / "g.edges"
    write_edgelist(g, path)
    h = read_edgelist(path)
    assert h == g
    assert h.n == 15  # trailing isolated nodes survive through the header


def test_edgelist_reader_comments_and_errors(tmp_path):
    p = tmp_path / "a.edges"
    p.write_text("# a comment\n0 1 2.5\n1 2  # trailing\n\n")
    g = read_edgelist(p)
    assert g.n == 3 and g.weight(0, 1) == 2.5 and g.weight(1, 2) == 1.0
    p.write_text("0 1 2 3\n")
    with pytest.raises(GraphError):
        read_edgelist(p)
    p.write_text("0 x\n")
    with pytest.raises(GraphError):
        read_edgelist(p)


edge_lists = st.lists(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.floats(0.0, 5.0)).filter(lambda e: e[0] != e[1]),
    max_size=30,
)


@given(edge_lists, st.randoms(use_true_random=False))
def test_permutation_of_distinct_pairs_gives_same_graph(edges, rnd):
    # keep one entry per unordered pair so that order cannot matter
    uniq = {}
    for i, j, w in edges:
        uniq[(min(i, j), max(i, j))] = (i, j, w)
    items = list(uniq.values())
    shuffled = items[:]
    rnd.shuffle(shuffled)
    assert build_graph(8, items) == build_graph(8, shuffled)


@given(edge_lists)
def test_degree_sum_is_twice_total_weight(edges):
    g = build_graph(8, edges)
    assert np.isclose(weighted_degrees(g).sum(), 2 * g.weights.sum())
    for i, j, _ in edges:
        assert g.weight(i, j) == g.weight(j, i)
