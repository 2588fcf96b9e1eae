"""Multi-hop node embeddings: random walks -> windowed co-occurrence -> PPMI -> SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from geonoise.graph import WeightedGraph


@dataclass
class WalkCorpus:
    """Walks stored row-wise; walks that start on an isolated node are padded with -1."""

    walks: np.ndarray
    walks_per_node: int
    length: int

    def __len__(self) -> int:
        return self.walks.shape[0]

    def as_lists(self) -> list[list[int]]:
        return [[int(v) for v in row if v >= 0] for row in self.walks]

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for walk in self.as_lists():
                fh.write(" ".join(map(str, walk)) + "\n")


@dataclass
class CooccurrenceStats:
    C: np.ndarray
    window: int

    @property
    def row_sums(self) -> np.ndarray:
        return self.C.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.C.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.C.sum())


@dataclass
class EmbeddingMatrix:
    Z: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.Z.shape[1]


def random_walk_corpus(
    g: WeightedGraph, walks_per_node: int, length: int, seed: int
) -> WalkCorpus:
    """``walks_per_node`` walks of ``length`` steps from every node.

    Each step moves to a neighbour with probability proportional to the edge
    weight.  Walk ``r * n + v`` is the ``r``-th walk started at node ``v``.
    """
    if length < 1:
        raise ValueError("walk length must be >= 1")
    if walks_per_node < 1:
        raise ValueError("walks_per_node must be >= 1")
    rng = np.random.default_rng(seed)
    adj = g.adjacency()
    indptr, indices = adj.indptr, adj.indices
    cum = np.cumsum(adj.data)
    # cumulative weight just before each row starts
    row_base = np.concatenate([[0.0], cum])[indptr[:-1]]
    row_total = np.concatenate([[0.0], cum])[indptr[1:]] - row_base
    deg_count = np.diff(indptr)

    starts = np.tile(np.arange(g.n), walks_per_node)
    walks = np.full((starts.size, length + 1), -1, dtype=np.int64)
    walks[:, 0] = starts
    alive = deg_count[starts] > 0
    cur = starts.copy()
    for step in range(1, length + 1):
        idx = np.flatnonzero(alive)
        u = cur[idx]
        r = rng.random(idx.size)
        target = row_base[u] + r * row_total[u]
        pos = np.searchsorted(cum, target, side="right")
        pos = np.clip(pos, indptr[u], indptr[u + 1] - 1)
        nxt = indices[pos]
        cur[idx] = nxt
        walks[idx, step] = nxt
    return WalkCorpus(walks, walks_per_node, length)


def cooccurrence_counts(corpus: WalkCorpus, window: int, n: int | None = None) -> CooccurrenceStats:
    """Count ordered position pairs ``(i, j)``, ``0 < |i - j| <= window``, per walk."""
    if window < 1:
        raise ValueError("window must be >= 1")
    walks = corpus.walks
    if n is None:
        n = int(walks.max()) + 1 if walks.size else 0
    counts = np.zeros(n * n, dtype=np.float64)
    for off in range(1, min(window, walks.shape[1] - 1) + 1):
        a = walks[:, :-off].ravel()
        b = walks[:, off:].ravel()
        ok = (a >= 0) & (b >= 0)
        a, b = a[ok], b[ok]
        counts += np.bincount(a * n + b, minlength=n * n)
        counts += np.bincount(b * n + a, minlength=n * n)
    return CooccurrenceStats(counts.reshape(n, n), window)


def ppmi_matrix(stats: CooccurrenceStats) -> np.ndarray:
    """Positive PMI; zero counts and empty rows/columns map to 0."""
    C = stats.C
    M = C.sum()
    if M <= 0:
        raise ValueError("empty co-occurrence corpus")
    R = C.sum(axis=1)
    Cc = C.sum(axis=0)
    denom = np.outer(R, Cc)
    out = np.zeros_like(C)
    mask = (C > 0) & (denom > 0)
    out[mask] = np.log(C[mask] * M / denom[mask])
    return np.maximum(out, 0.0)


def truncated_svd(mat: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading ``rank`` singular triplets of a dense matrix."""
    U, s, Vt = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    return U[:, :rank], s[:rank], Vt[:rank]


def embed(ppmi: np.ndarray, rank: int, seed: int = 0) -> EmbeddingMatrix:
    """Rows of ``U_r sqrt(S_r)``, each nonzero row scaled to unit length.

    ``seed`` is accepted for interface symmetry; the dense solver is
    deterministic.
    """
    n = ppmi.shape[0]
    if not 1 <= rank <= n:
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    U, s, _ = truncated_svd(ppmi, rank)
    Z = U * np.sqrt(s)
    norms = np.linalg.norm(Z, axis=1)
    nz = norms > 1e-12
    Z[nz] /= norms[nz, None]
    Z[~nz] = 0.0
    return EmbeddingMatrix(Z, s)


def node_embeddings(
    g: WeightedGraph,
    dim: int = 64,
    walk_len: int = 40,
    num_walks: int = 2,
    window: int = 5,
    seed: int = 0,
) -> EmbeddingMatrix:
    """Full walk -> PPMI -> SVD chain; rank is clamped to ``n``."""
    if g.num_edges == 0:
        return EmbeddingMatrix(np.zeros((g.n, min(dim, g.n))), np.zeros(min(dim, g.n)))
    corpus = random_walk_corpus(g, num_walks, walk_len, seed)
    stats = cooccurrence_counts(corpus, window, g.n)
    return embed(ppmi_matrix(stats), min(dim, g.n), seed)
