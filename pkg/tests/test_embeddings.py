import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from geonoise.embeddings import (
    CooccurrenceStats,
    WalkCorpus,
    cooccurrence_counts,
    embed,
    node_embeddings,
    ppmi_matrix,
    random_walk_corpus,
)
from geonoise.graph import build_graph

from conftest import cliques, random_graph


def corpus(*walks):
    return WalkCorpus(np.array(walks, dtype=np.int64), 1, len(walks[0]) - 1)


def brute_cooccurrence(walks, window, n):
    C = np.zeros((n, n))
    for walk in walks:
        walk = [v for v in walk if v >= 0]
        for i in range(len(walk)):
            for j in range(len(walk)):
                if i != j and abs(i - j) <= window:
                    C[walk[i], walk[j]] += 1
    return C


# --- walks --------------------------------------------------------------------------


def test_two_node_path_alternates():
    g = build_graph(2, [(0, 1, 1.0)])
    c = random_walk_corpus(g, 5, 3, seed=0)
    for w in c.walks:
        assert w.tolist() in ([0, 1, 0, 1], [1, 0, 1, 0])


def test_triangle_neighbour_choice_is_uniform():
    g = build_graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    c = random_walk_corpus(g, 1000, 1, seed=1)
    from0 = c.walks[c.walks[:, 0] == 0, 1]
    frac = np.mean(from0 == 1)
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / from0.size)


def test_star_leaves_return_to_centre():
    g = build_graph(5, [(0, k, 1.0) for k in range(1, 5)])
    c = random_walk_corpus(g, 20, 2, seed=2)
    leaves = c.walks[c.walks[:, 0] != 0]
    assert np.all(leaves[:, 1] == 0)


def test_weighted_transitions_follow_edge_weights():
    g = build_graph(3, [(0, 1, 3.0), (0, 2, 1.0)])
    c = random_walk_corpus(g, 4000, 1, seed=3)
    step = c.walks[c.walks[:, 0] == 0, 1]
    obs = np.array([np.sum(step == 1), np.sum(step == 2)])
    assert stats.chisquare(obs, step.size * np.array([0.75, 0.25])).pvalue > 1e-3


def test_walk_steps_are_edges_and_counts(rng):
    g = random_graph(25, 0.2, rng)
    c = random_walk_corpus(g, 3, 10, seed=4)
    assert len(c) == 3 * 25 and c.walks.shape[1] == 11
    for w in c.as_lists():
        for u, v in zip(w, w[1:]):
            assert g.has_edge(u, v)


def test_isolated_nodes_give_singleton_walks():
    g = build_graph(3, [(0, 1, 1.0)])
    c = random_walk_corpus(g, 2, 4, seed=0)
    assert [w for w in c.as_lists() if w[0] == 2] == [[2], [2]]


def test_walks_deterministic_and_dump(tmp_path, rng):
    g = random_graph(15, 0.3, rng)
    a = random_walk_corpus(g, 2, 5, seed=7)
    b = random_walk_corpus(g, 2, 5, seed=7)
    np.testing.assert_array_equal(a.walks, b.walks)
    p = tmp_path / "walks.txt"
    a.dump(p)
    lines = p.read_text().splitlines()
    assert len(lines) == 30 and lines[0].split()[0] == "0"


def test_walk_argument_checks(rng):
    g = random_graph(5, 0.5, rng)
    with pytest.raises(ValueError):
        random_walk_corpus(g, 1, 0, seed=0)
    with pytest.raises(ValueError):
        random_walk_corpus(g, 0, 3, seed=0)


# --- co-occurrence --------------------------------------------------------------------


def test_cooccurrence_hand_counts():
    C1 = cooccurrence_counts(corpus([0, 1, 2]), 1, 3).C
    assert C1[0, 1] == C1[1, 0] == 1 and C1[1, 2] == C1[2, 1] == 1 and C1[0, 2] == 0
    C2 = cooccurrence_counts(corpus([0, 1, 2]), 2, 3).C
    assert C2[0, 2] == C2[2, 0] == 1


@pytest.mark.parametrize("window", [1, 2, 3, 5, 12])
def test_cooccurrence_matches_position_pair_loop(window, rng):
    g = random_graph(20, 0.25, rng)
    c = random_walk_corpus(g, 2, 8, seed=window)
    fast = cooccurrence_counts(c, window, g.n)
    np.testing.assert_array_equal(fast.C, brute_cooccurrence(c.walks, window, g.n))
    np.testing.assert_array_equal(fast.C, fast.C.T)
    assert fast.total == fast.row_sums.sum() == fast.col_sums.sum()


# --- PPMI ---------------------------------------------------------------------------


def test_ppmi_two_nodes():
    P = ppmi_matrix(CooccurrenceStats(np.array([[0.0, 1.0], [1.0, 0.0]]), 1))
    assert P[0, 1] == pytest.approx(math.log(2))
    assert P[0, 0] == 0.0


def test_ppmi_uniform_off_diagonal():
    C = np.ones((4, 4)) - np.eye(4)
    P = ppmi_matrix(CooccurrenceStats(C, 1))
    # M = 12, R = C = 3 -> log(12 / 9)
    off = P[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, math.log(12 / 9), rtol=0, atol=1e-15)
    assert np.all(np.diag(P) == 0)


def test_ppmi_clips_negative_pmi():
    C = np.array([[10.0, 1.0], [1.0, 10.0]])
    P = ppmi_matrix(CooccurrenceStats(C, 1))
    assert 1.0 * 22 < 11 * 11 and P[0, 1] == 0.0


def test_ppmi_empty_corpus_raises():
    with pytest.raises(ValueError):
        ppmi_matrix(CooccurrenceStats(np.zeros((3, 3)), 1))


@given(st.integers(2, 9), st.integers(0, 10_000))
def test_ppmi_matches_hand_formula(n, seed):
    r = np.random.default_rng(seed)
    C = r.integers(0, 4, (n, n)).astype(float)
    C = C + C.T
    if C.sum() == 0:
        C[0, 1] = C[1, 0] = 1
    P = ppmi_matrix(CooccurrenceStats(C, 2))
    M, R, Cc = C.sum(), C.sum(1), C.sum(0)
    for u in range(n):
        for v in range(n):
            want = 0.0
            if C[u, v] > 0:
                want = max(math.log(C[u, v] * M / (R[u] * Cc[v])), 0.0)
            assert abs(P[u, v] - want) <= 1e-12
    assert np.all(P >= 0) and np.allclose(P, P.T)


# --- SVD embeddings -------------------------------------------------------------------------


def test_embed_scaled_identity():
    e = embed(3.0 * np.eye(5), 5)
    np.testing.assert_allclose(e.singular_values, 3.0)
    G = e.Z @ e.Z.T
    np.testing.assert_allclose(G, np.eye(5), atol=1e-12)


def test_rank_one_reconstruction():
    r = np.random.default_rng(0)
    u, v = r.random(6), r.random(6)
    M = np.outer(u, v)
    from geonoise.embeddings import truncated_svd

    U, s, Vt = truncated_svd(M, 1)
    assert np.abs(U * s @ Vt - M).max() < 1e-8


def test_singular_values_match_dense_oracle():
    r = np.random.default_rng(5)
    A = r.random((8, 8))
    A = np.maximum(A + A.T - 1.0, 0.0)
    e = embed(A, 3)
    np.testing.assert_allclose(e.singular_values, np.linalg.svd(A, compute_uv=False)[:3], atol=1e-6)


def test_embedding_rows_unit_or_zero():
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 1.0
    e = embed(A, 2)
    norms = np.linalg.norm(e.Z, axis=1)
    assert np.allclose(norms[:2], 1.0, atol=1e-6) and np.all(norms[2:] == 0)


def test_embed_rank_checks():
    with pytest.raises(ValueError):
        embed(np.eye(3), 4)
    with pytest.raises(ValueError):
        embed(np.eye(3), 0)


@given(st.integers(0, 1000))
def test_svd_monotonicity_properties(seed):
    r = np.random.default_rng(seed)
    A = r.random((7, 7))
    A = A + A.T
    from geonoise.embeddings import truncated_svd

    errs = []
    for k in range(1, 8):
        U, s, Vt = truncated_svd(A, k)
        assert np.all(np.diff(s) <= 1e-12)
        errs.append(np.linalg.norm(A - U * s @ Vt))
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


def test_node_embeddings_end_to_end():
    g, _ = cliques([8, 8])
    e = node_embeddings(g, dim=4, walk_len=10, num_walks=3, window=3, seed=0)
    assert e.Z.shape == (16, 4)
    np.testing.assert_allclose(np.linalg.norm(e.Z, axis=1), 1.0, atol=1e-6)
    # rank is clamped to n on tiny graphs
    assert node_embeddings(g, dim=64, seed=0).rank == 16
