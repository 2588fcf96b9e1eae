import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import geonoise.ingest as ingest
from geonoise.ingest import IngestError, load_attribute_graph, max_hamming, write_attribute_graph

ATTRS = """\
# id then four bits
10 1 1 0 0
20 1 1 0 0
30 0 0 1 1
40 1 0 1 0
50 0 1 1 1
"""
EDGES = "10 20\n20 30 0.5\n30 40\n40 50 2\n"
LABELS = "10 0\n20 0\n30 1\n40 1\n50 1\n"

# Hamming distances by hand; the largest is 4 (between 10/20 and 30)
HAND = np.array([
    [0, 0, 4, 2, 3],
    [0, 0, 4, 2, 3],
    [4, 4, 0, 2, 1],
    [2, 2, 2, 0, 3],
    [3, 3, 1, 3, 0],
])


def write(tmp_path, **files):
    out = {}
    for name, text in files.items():
        p = tmp_path / name
        p.write_text(text)
        out[name] = p
    return out


@pytest.fixture
def toy(tmp_path):
    f = write(tmp_path, e=EDGES, a=ATTRS, l=LABELS)
    return load_attribute_graph(f["e"], f["a"], f["l"])


def test_hand_table(toy):
    np.testing.assert_array_equal(toy.hamming(np.arange(5)[:, None], np.arange(5)[None, :]), HAND)
    np.testing.assert_allclose(toy.distance_matrix(), HAND / 2.0, rtol=0, atol=0)
    assert toy.scale == 0.5 and not toy.sampled_max


def test_anchor_distances(toy):
    assert toy.distance(0, 1) == 0.0
    assert toy.distance(0, 2) == 2.0


def test_graph_and_labels(toy):
    g = toy.graph
    assert g.n == 5 and g.num_edges == 4
    assert g.weight(toy.index_of(20), toy.index_of(30)) == 0.5
    assert g.weight(toy.index_of(40), toy.index_of(50)) == 2.0
    assert toy.labels.tolist() == [0, 0, 1, 1, 1]
    with pytest.raises(KeyError):
        toy.index_of(99)


def test_distance_properties(toy):
    D = toy.distance_matrix()
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0) and D.max() <= 2.0


def test_round_trip(toy, tmp_path):
    paths = write_attribute_graph(toy, tmp_path / "copy")
    back = load_attribute_graph(*paths)
    np.testing.assert_array_equal(back.distance_matrix(), toy.distance_matrix())
    assert back.graph == toy.graph
    np.testing.assert_array_equal(back.labels, toy.labels)


@pytest.mark.parametrize("attrs,edges,labels,msg", [
    ("1 0 1\n2 1\n", "1 2\n", None, "expected 2"),
    ("1 0 2\n2 1 0\n", "1 2\n", None, "0 or 1"),
    ("1 0 1\n2 1 0\n", "1 3\n", None, "unknown node id 3"),
    ("1 0 1\n2 1 0\n", "1 2 x\n", None, "bad weight"),
    ("1 0 1\n2 1 0\n", "1\n", None, "expected 'u v"),
    ("1 0 1\n1 1 0\n", "", None, "duplicate"),
    ("1 0 1\n2 1 0\n", "1 1\n", None, "self-loop"),
    ("1 0 1\n2 1 0\n", "1 2\n", "1 0\n", "no label"),
    ("a 0 1\n", "", None, "integer"),
    ("", "", None, "no attribute rows"),
])
def test_malformed_inputs(tmp_path, attrs, edges, labels, msg):
    files = dict(a=attrs, e=edges)
    if labels is not None:
        files["l"] = labels
    f = write(tmp_path, **files)
    with pytest.raises(IngestError, match=msg):
        load_attribute_graph(f["e"], f["a"], f.get("l"))


@given(st.integers(2, 12), st.integers(1, 10), st.integers(0, 10_000))
def test_exact_max_matches_pair_loop(n, m, seed):
    X = np.random.default_rng(seed).integers(0, 2, (n, m)).astype(np.uint8)
    brute = max(int(np.sum(X[i] != X[j])) for i in range(n) for j in range(n))
    assert max_hamming(X) == (brute, False)


def test_sampled_max_for_large_inputs(monkeypatch):
    monkeypatch.setattr(ingest, "EXACT_MAX_LIMIT", 10)
    monkeypatch.setattr(ingest, "MAX_SAMPLE_PAIRS", 5000)
    X = np.zeros((40, 6), dtype=np.uint8)
    X[::2] = 1
    best, sampled = max_hamming(X, seed=0)
    assert sampled and best == 6
