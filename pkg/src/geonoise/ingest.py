"""Attribute graphs: an edge list plus one binary attribute vector per node.

Latent distances are Hamming distances between attribute vectors, scaled so
the largest pairwise distance is 2.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from geonoise.graph import WeightedGraph, build_graph

EXACT_MAX_LIMIT = 5000
MAX_SAMPLE_PAIRS = 1_000_000


class IngestError(ValueError):
    """Malformed or inconsistent input files."""


@dataclass
class AttributeGraph:
    graph: WeightedGraph
    attributes: np.ndarray
    node_ids: np.ndarray
    labels: np.ndarray | None
    scale: float
    sampled_max: bool = False

    @property
    def n(self) -> int:
        return self.graph.n

    def hamming(self, i, j) -> np.ndarray:
        return np.count_nonzero(self.attributes[i] != self.attributes[j], axis=-1)

    def distance(self, i, j):
        """Normalised distance, vectorised over index arrays."""
        d = np.minimum(self.scale * self.hamming(i, j), 2.0)
        return float(d) if np.ndim(d) == 0 else d

    def distance_matrix(self) -> np.ndarray:
        X = self.attributes.astype(np.float64)
        ones = X @ X.T
        pop = X.sum(axis=1)
        ham = pop[:, None] + pop[None, :] - 2.0 * ones
        return np.minimum(self.scale * ham, 2.0)

    def index_of(self, node_id: int) -> int:
        pos = int(np.searchsorted(self.node_ids, node_id))
        if pos >= self.node_ids.size or self.node_ids[pos] != node_id:
            raise KeyError(node_id)
        return pos


def _lines(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if body:
                yield lineno, body.split()


def _int(tok, path, lineno):
    try:
        return int(tok)
    except ValueError:
        raise IngestError(f"{path}:{lineno}: expected an integer, got {tok!r}") from None


def read_attributes(path) -> tuple[np.ndarray, np.ndarray]:
    """``node_id b_1 ... b_m`` lines; returns ids (sorted) and the 0/1 matrix."""
    ids, rows = [], []
    width = None
    for lineno, parts in _lines(path):
        nid = _int(parts[0], path, lineno)
        bits = parts[1:]
        if width is None:
            width = len(bits)
        elif len(bits) != width:
            raise IngestError(f"{path}:{lineno}: attribute vector has {len(bits)} entries, expected {width}")
        if any(b not in ("0", "1") for b in bits):
            raise IngestError(f"{path}:{lineno}: attribute entries must be 0 or 1")
        ids.append(nid)
        rows.append([b == "1" for b in bits])
    if not ids:
        raise IngestError(f"{path}: no attribute rows")
    ids = np.asarray(ids, dtype=np.int64)
    if np.unique(ids).size != ids.size:
        raise IngestError(f"{path}: duplicate node ids")
    order = np.argsort(ids, kind="stable")
    return ids[order], np.asarray(rows, dtype=np.uint8).reshape(len(ids), width or 0)[order]


def _lookup(ids: np.ndarray, nid: int, path, lineno) -> int:
    pos = int(np.searchsorted(ids, nid))
    if pos >= ids.size or ids[pos] != nid:
        raise IngestError(f"{path}:{lineno}: unknown node id {nid}")
    return pos


def read_id_edges(path, ids: np.ndarray) -> WeightedGraph:
    triples = []
    for lineno, parts in _lines(path):
        if len(parts) not in (2, 3):
            raise IngestError(f"{path}:{lineno}: expected 'u v [w]'")
        u = _lookup(ids, _int(parts[0], path, lineno), path, lineno)
        v = _lookup(ids, _int(parts[1], path, lineno), path, lineno)
        try:
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise IngestError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
        if u == v:
            raise IngestError(f"{path}:{lineno}: self-loop on node {parts[0]}")
        triples.append((u, v, w))
    try:
        return build_graph(ids.size, triples)
    except ValueError as exc:
        raise IngestError(f"{path}: {exc}") from None


def read_labels(path, ids: np.ndarray) -> np.ndarray:
    labels = np.full(ids.size, -1, dtype=np.int64)
    for lineno, parts in _lines(path):
        if len(parts) != 2:
            raise IngestError(f"{path}:{lineno}: expected 'node_id label'")
        pos = _lookup(ids, _int(parts[0], path, lineno), path, lineno)
        lab = _int(parts[1], path, lineno)
        if lab < 0:
            raise IngestError(f"{path}:{lineno}: labels must be nonnegative")
        labels[pos] = lab
    if np.any(labels < 0):
        missing = ids[labels < 0][:5].tolist()
        raise IngestError(f"{path}: no label for node ids {missing}")
    return labels


def max_hamming(attributes: np.ndarray, seed: int = 0) -> tuple[int, bool]:
    """Largest pairwise Hamming distance; estimated from sampled pairs for large ``n``."""
    n = attributes.shape[0]
    if n < 2:
        return 0, False
    if n <= EXACT_MAX_LIMIT:
        X = attributes.astype(np.float64)
        pop = X.sum(axis=1)
        ham = pop[:, None] + pop[None, :] - 2.0 * (X @ X.T)
        return int(round(ham.max())), False
    rng = np.random.default_rng(seed)
    best = 0
    left = MAX_SAMPLE_PAIRS
    while left > 0:
        size = min(left, 100_000)
        i = rng.integers(0, n, size)
        j = rng.integers(0, n, size)
        best = max(best, int(np.count_nonzero(attributes[i] != attributes[j], axis=1).max()))
        left -= size
    return best, True


def load_attribute_graph(edge_path, attribute_path, label_path=None, seed: int = 0) -> AttributeGraph:
    ids, attrs = read_attributes(attribute_path)
    g = read_id_edges(edge_path, ids)
    labels = read_labels(label_path, ids) if label_path is not None else None
    hmax, sampled = max_hamming(attrs, seed)
    scale = 2.0 / hmax if hmax > 0 else 0.0
    return AttributeGraph(g, attrs, ids, labels, scale, sampled)


def write_attribute_graph(ag: AttributeGraph, prefix) -> tuple[str, ...]:
    """Write ``<prefix>.edges``, ``<prefix>.attrs`` and, with labels, ``<prefix>.labels``."""
    prefix = os.fspath(prefix)
    ids = ag.node_ids
    paths = [prefix + ".edges", prefix + ".attrs"]
    with open(paths[0], "w") as fh:
        for i, j, w in zip(ag.graph.src, ag.graph.dst, ag.graph.weights):
            fh.write(f"{ids[i]} {ids[j]} {w:.17g}\n")
    with open(paths[1], "w") as fh:
        for nid, row in zip(ids, ag.attributes):
            fh.write(f"{nid} " + " ".join(map(str, row.tolist())) + "\n")
    if ag.labels is not None:
        paths.append(prefix + ".labels")
        with open(paths[2], "w") as fh:
            for nid, lab in zip(ids, ag.labels):
                fh.write(f"{nid} {lab}\n")
    return tuple(paths)
