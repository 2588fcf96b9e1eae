"""Eigen-solvers, centroid clustering and the soft-assignment rule shared by all operators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.cluster import KMeans

DENSE_LIMIT = 512
EIG_TOL = 1e-8


class SpectralError(RuntimeError):
    """Eigen-solver failure (non-convergence or an unusable spectrum)."""


@dataclass
class ClusteringResult:
    soft: np.ndarray
    hard: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.soft.shape[1]

    def to_json(self) -> str:
        return json.dumps(self.diagnostics, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # make the largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def symmetric_eigs(M, k: int, largest: bool = True, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``k`` extreme algebraic eigenpairs of a symmetric matrix.

    Returned in order of decreasing eigenvalue for ``largest=True`` and
    increasing otherwise.  Dense LAPACK for ``n <= 512``, Lanczos above.
    """
    n = M.shape[0]
    k = min(k, n)
    if n <= DENSE_LIMIT or k >= n - 1:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M)
        vals, vecs = scipy.linalg.eigh(dense)
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            vals, vecs = spla.eigsh(
                sp.csr_matrix(M), k=k, which="LA" if largest else "SA",
                tol=EIG_TOL, maxiter=10 * n, v0=v0,
            )
        except spla.ArpackNoConvergence as exc:
            raise SpectralError(f"Lanczos did not converge for k={k}, n={n}") from exc
    order = np.argsort(vals)
    if largest:
        order = order[::-1]
    order = order[:k]
    return vals[order], _fix_signs(vecs[:, order])


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def centroid_soft(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """``q_ik ~ exp(-||row_i - c_k||^2 / tau)`` with ``tau`` the mean squared distance."""
    d2 = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    tau = d2.mean()
    if not tau > 0:
        return np.full(d2.shape, 1.0 / d2.shape[1])
    return softmax_rows(-d2 / tau)


def group_centroids(rows: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    cents = np.zeros((k, rows.shape[1]))
    for c in range(k):
        members = labels == c
        if members.any():
            cents[c] = rows[members].mean(axis=0)
    return cents


def align_soft(soft: np.ndarray, hard: np.ndarray) -> np.ndarray:
    """Swap columns per row so that ``argmax(soft) == hard`` keeps holding after refinement."""
    soft = soft.copy()
    rows = np.arange(soft.shape[0])
    top = soft.argmax(axis=1)
    bad = np.flatnonzero(top != hard)
    if bad.size:
        a, b = top[bad], hard[bad]
        va, vb = soft[bad, a].copy(), soft[bad, b].copy()
        soft[bad, a], soft[bad, b] = vb, va
    # exact ties: argmax picks the first column, so nudge the chosen one
    tie = soft.argmax(axis=1) != hard
    soft[rows[tie], hard[tie]] += 1e-12
    return soft / soft.sum(axis=1, keepdims=True)


def kmeans_rows(rows: np.ndarray, k: int, seed: int, n_init: int = 4) -> np.ndarray:
    """Hard k-means labels for the rows of an embedding (deterministic per seed)."""
    n = rows.shape[0]
    k = min(k, n)
    km = KMeans(n_clusters=k, n_init=n_init, random_state=seed)
    return km.fit_predict(rows).astype(np.int64)


def cluster_rows(rows: np.ndarray, k: int, seed: int, active: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """k-means on embedding rows plus centroid-softmax memberships.

    Rows flagged inactive (isolated nodes) get a uniform soft row and a
    parity label.
    """
    n = rows.shape[0]
    if active is None:
        active = np.ones(n, dtype=bool)
    hard = np.arange(n, dtype=np.int64) % k
    soft = np.full((n, k), 1.0 / k)
    idx = np.flatnonzero(active)
    if idx.size >= k:
        sub = rows[idx]
        lab = kmeans_rows(sub, k, seed)
        cents = group_centroids(sub, lab, k)
        q = centroid_soft(sub, cents)
        soft[idx] = align_soft(q, lab)
        hard[idx] = lab
    elif idx.size:
        hard[idx] = np.arange(idx.size)
        soft[idx] = np.eye(k)[hard[idx]]
    return soft, hard


def result_from_labels(
    rows: np.ndarray, hard: np.ndarray, k: int, active: np.ndarray | None = None
) -> np.ndarray:
    """Soft memberships from given hard labels: centroids per label group, then softmax."""
    n = rows.shape[0]
    if active is None:
        active = np.ones(n, dtype=bool)
    soft = np.full((n, k), 1.0 / k)
    idx = np.flatnonzero(active)
    if idx.size:
        sub = rows[idx]
        cents = group_centroids(sub, hard[idx], k)
        soft[idx] = align_soft(centroid_soft(sub, cents), hard[idx])
    return soft
