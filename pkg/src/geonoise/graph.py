"""Undirected weighted graph shared by every algorithm in the package.

Edges are stored once, canonically as ``(i, j)`` with ``i < j`` and sorted
lexicographically, alongside a symmetric CSR adjacency for neighbour
iteration and a dict for constant-time weight lookup.  Instances are
immutable; reweighting produces a new graph.
"""

from __future__ import annotations

import hashlib
import os
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed graph input."""


class WeightedGraph:
    __slots__ = ("n", "src", "dst", "weights", "_adj", "_lookup")

    def __init__(self, n: int, src, dst, weights):
        if n < 1:
            raise GraphError(f"node count must be >= 1, got {n}")
        self.n = int(n)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        order = np.lexsort((dst, src))
        self.src = src[order]
        self.dst = dst[order]
        self.weights = weights[order]
        for arr in (self.src, self.dst, self.weights):
            arr.setflags(write=False)
        self._adj = None
        self._lookup = None

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edge_pairs(self) -> np.ndarray:
        """``(m, 2)`` array of canonical ``(i, j)`` pairs, ``i < j``."""
        return np.column_stack([self.src, self.dst])

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency in CSR form (cached)."""
        if self._adj is None:
            rows = np.concatenate([self.src, self.dst])
            cols = np.concatenate([self.dst, self.src])
            vals = np.concatenate([self.weights, self.weights])
            adj = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
            adj.sort_indices()
            self._adj = adj
        return self._adj

    def dense(self) -> np.ndarray:
        return self.adjacency().toarray()

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour ids of ``i`` and the matching edge weights."""
        adj = self.adjacency()
        lo, hi = adj.indptr[i], adj.indptr[i + 1]
        return adj.indices[lo:hi], adj.data[lo:hi]

    def _index(self) -> dict:
        if self._lookup is None:
            self._lookup = {
                (int(a), int(b)): k for k, (a, b) in enumerate(zip(self.src, self.dst))
            }
        return self._lookup

    def edge_index(self, i: int, j: int) -> int | None:
        if i > j:
            i, j = j, i
        return self._index().get((int(i), int(j)))

    def weight(self, i: int, j: int) -> float:
        k = self.edge_index(i, j)
        return 0.0 if k is None else float(self.weights[k])

    def has_edge(self, i: int, j: int) -> bool:
        return self.edge_index(i, j) is not None

    def with_weights(self, weights) -> "WeightedGraph":
        """Same edge set, new weights (aligned with ``self.src``/``self.dst``).

        Zero weights are dropped, matching ``build_graph`` semantics.
        """
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.weights.shape:
            raise GraphError("weight vector does not match edge count")
        if np.any(weights < 0):
            raise GraphError("negative edge weight")
        keep = weights > 0
        return WeightedGraph(self.n, self.src[keep], self.dst[keep], weights[keep])

    def digest(self) -> str:
        """Content hash, used to check that paired runs saw the same graph."""
        h = hashlib.sha256()
        h.update(np.int64(self.n).tobytes())
        for arr in (self.src, self.dst, self.weights):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.num_edges})"


def build_graph(n: int, edge_list: Iterable[Sequence]) -> WeightedGraph:
    """Build a graph from ``(i, j, w)`` triples.

    Duplicates of the same unordered pair keep the last weight seen;
    zero-weight entries are dropped after collapsing.
    """
    if n < 1:
        raise GraphError(f"node count must be >= 1, got {n}")
    collapsed: dict[tuple[int, int], float] = {}
    for entry in edge_list:
        i, j = int(entry[0]), int(entry[1])
        w = float(entry[2]) if len(entry) > 2 else 1.0
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if not w >= 0:
            raise GraphError(f"negative or NaN weight {w} on ({i}, {j})")
        key = (i, j) if i < j else (j, i)
        collapsed[key] = w
    pairs = [(k, w) for k, w in collapsed.items() if w > 0]
    if not pairs:
        empty = np.zeros(0)
        return WeightedGraph(n, empty, empty, empty)
    keys, ws = zip(*pairs)
    src, dst = zip(*keys)
    return WeightedGraph(n, src, dst, ws)


def from_arrays(n: int, src, dst, weights=None) -> WeightedGraph:
    """Vectorised constructor for already-canonical, duplicate-free input."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if weights is None:
        weights = np.ones(src.size)
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    return WeightedGraph(n, lo, hi, weights)


def weighted_degrees(g: WeightedGraph) -> np.ndarray:
    deg = np.zeros(g.n)
    np.add.at(deg, g.src, g.weights)
    np.add.at(deg, g.dst, g.weights)
    return deg


def write_edgelist(g: WeightedGraph, path: str | os.PathLike) -> None:
    """Write ``i j w`` lines; weights use 17 significant digits so reloading is exact."""
    with open(path, "w") as fh:
        fh.write(f"# n={g.n}\n")
        for i, j, w in zip(g.src, g.dst, g.weights):
            fh.write(f"{i} {j} {w:.17g}\n")


def read_edgelist(path: str | os.PathLike, n: int | None = None) -> WeightedGraph:
    """Read an edge list written by :func:`write_edgelist` or by hand.

    A ``# n=<count>`` header fixes the node count (so isolated trailing nodes
    survive a round trip); otherwise it is ``max id + 1`` unless given.
    """
    header_n = None
    triples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if body.startswith("n="):
                    header_n = int(body[2:])
                continue
            stripped = stripped.split("#", 1)[0].strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) not in (2, 3):
                raise GraphError(f"{path}:{lineno}: expected 'i j [w]', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphError(f"{path}:{lineno}: {exc}") from None
            triples.append((i, j, w))
    if n is None:
        n = header_n
    if n is None:
        n = max((max(i, j) for i, j, _ in triples), default=-1) + 1
    return build_graph(max(n, 1), triples)
