"""Control operators: Bethe-Hessian, non-backtracking, motif Laplacian, weighted BP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from geonoise.graph import WeightedGraph, weighted_degrees
from geonoise.spectral import (
    DENSE_LIMIT,
    EIG_TOL,
    ClusteringResult,
    SpectralError,
    _fix_signs,
    cluster_rows,
    symmetric_eigs,
)

MOTIF_FALLBACK_SCALE = 1e-3


def _check_nonempty(g: WeightedGraph, k: int) -> None:
    if g.n < k:
        raise ValueError(f"graph has {g.n} nodes, fewer than k={k}")


def bethe_hessian(g: WeightedGraph, r: float | None = None) -> tuple[sp.csr_matrix, float]:
    """``H(r) = (r^2 - 1) I - r A + D`` with ``r = sqrt(mean weighted degree)`` by default."""
    A = g.adjacency()
    deg = weighted_degrees(g)
    if r is None:
        r = math.sqrt(max(deg.mean(), 0.0))
    H = (r * r - 1.0) * sp.identity(g.n, format="csr") - r * A + sp.diags(deg)
    return H.tocsr(), r


def bethe_hessian_cluster(g: WeightedGraph, k: int = 2, seed: int = 0) -> ClusteringResult:
    _check_nonempty(g, k)
    H, r = bethe_hessian(g)
    vals, vecs = symmetric_eigs(H, k, largest=False, seed=seed)
    active = weighted_degrees(g) > 0
    soft, hard = cluster_rows(vecs, k, seed, active)
    return ClusteringResult(soft, hard, {"r": r, "eigenvalues": vals.tolist()})


def nonbacktracking_companion(g: WeightedGraph) -> sp.csr_matrix:
    """The ``2n x 2n`` Ihara-Bass matrix ``[[0, D - I], [-I, A]]``."""
    n = g.n
    A = g.adjacency()
    D = sp.diags(weighted_degrees(g))
    I = sp.identity(n)
    return sp.bmat([[None, D - I], [-I, A]], format="csr")


def nonbacktracking_cluster(g: WeightedGraph, k: int = 2, seed: int = 0) -> ClusteringResult:
    """Real parts of the leading eigenvectors (by real part), first ``n`` coordinates."""
    _check_nonempty(g, k)
    n = g.n
    B = nonbacktracking_companion(g)
    if 2 * n <= DENSE_LIMIT or k >= 2 * n - 2:
        vals, vecs = scipy.linalg.eig(B.toarray())
    else:
        v0 = np.random.default_rng(seed).standard_normal(2 * n)
        try:
            vals, vecs = spla.eigs(B, k=min(2 * k + 2, 2 * n - 2), which="LR",
                                   tol=EIG_TOL, maxiter=20 * n, v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SpectralError("non-backtracking eigen-solve did not converge") from exc
    order = np.lexsort((-np.abs(vals.imag), -vals.real))[:k]
    rows = _fix_signs(np.real(vecs[:n, order]))
    active = weighted_degrees(g) > 0
    soft, hard = cluster_rows(rows, k, seed, active)
    diag = {"eigenvalues_real": vals[order].real.tolist(), "eigenvalues_imag": vals[order].imag.tolist()}
    return ClusteringResult(soft, hard, diag)


def motif_adjacency(g: WeightedGraph) -> tuple[sp.csr_matrix, bool]:
    """Triangle-motif adjacency: each edge weighted by the triangles through it.

    Edges touching a node with no triangle fall back to ``1e-3`` times their
    original weight.  Returns the matrix and whether the fallback was used.
    """
    A = g.adjacency()
    Ab = A.copy()
    Ab.data = np.ones_like(Ab.data)
    T = Ab.multiply(Ab @ Ab).tocsr()
    T.eliminate_zeros()
    tri_nodes = np.asarray(T.sum(axis=1)).ravel() > 0
    lonely = ~tri_nodes & (np.diff(A.indptr) > 0)
    used = bool(lonely.any())
    if used:
        rows = np.repeat(np.arange(g.n), np.diff(A.indptr))
        touch = lonely[rows] | lonely[A.indices]
        fb = sp.csr_matrix(
            (MOTIF_FALLBACK_SCALE * A.data[touch], (rows[touch], A.indices[touch])),
            shape=A.shape,
        )
        T = (T + fb).tocsr()
    return T, used


def motif_laplacian_cluster(g: WeightedGraph, k: int = 2, seed: int = 0) -> ClusteringResult:
    """Normalised-Laplacian spectral clustering on the triangle-motif adjacency."""
    _check_nonempty(g, k)
    M, used = motif_adjacency(g)
    deg = np.asarray(M.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    N = (sp.diags(inv) @ M @ sp.diags(inv)).tocsr()
    # smallest eigenvectors of I - N are the largest of N
    vals, vecs = symmetric_eigs(N, k, largest=True, seed=seed)
    rows = vecs.copy()
    norms = np.linalg.norm(rows, axis=1)
    rows[norms > 0] /= norms[norms > 0, None]
    soft, hard = cluster_rows(rows, k, seed, deg > 0)
    return ClusteringResult(
        soft, hard, {"fallback": used, "laplacian_eigenvalues": (1.0 - vals).tolist()}
    )


# --- weighted belief propagation ---------------------------------------------


@dataclass(frozen=True)
class BpConfig:
    beta_temp: float = 1.0
    k: int = 2
    max_iters: int = 200
    damping: float = 0.5
    tol: float = 1e-6
    noise: float = 0.01
    balance: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.beta_temp > 0:
            raise ValueError("beta_temp must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        if self.k < 2:
            raise ValueError("k must be >= 2")


def directed_edges(g: WeightedGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Both orientations of every edge: ``(tail, head, weight, reverse_index)``."""
    m = g.num_edges
    tail = np.concatenate([g.src, g.dst])
    head = np.concatenate([g.dst, g.src])
    w = np.concatenate([g.weights, g.weights])
    rev = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    return tail, head, w, rev


def compatibility(messages: np.ndarray, weights: np.ndarray, beta_temp: float) -> np.ndarray:
    """``phi(c) = 1 + (exp(beta w) - 1) M(c)`` for each directed message."""
    return 1.0 + np.expm1(beta_temp * weights)[:, None] * messages


def _node_fields(g, tail, head, log_phi, k):
    # sum of incoming log-factors at each node
    S = np.zeros((g.n, k))
    np.add.at(S, head, log_phi)
    return S


def _normalize_log(logm: np.ndarray) -> np.ndarray:
    logm = logm - logm.max(axis=1, keepdims=True)
    m = np.exp(logm)
    return m / m.sum(axis=1, keepdims=True)


def bp_update(
    g: WeightedGraph, messages: np.ndarray, beta_temp: float, field: np.ndarray | None = None
) -> np.ndarray:
    """One undamped synchronous update.

    ``messages[e]`` is the message along directed edge ``e`` of
    :func:`directed_edges`; the new message ``i -> j`` is proportional to the
    product of ``phi_{l -> i}`` over neighbours ``l != j``.
    """
    tail, head, w, rev = directed_edges(g)
    k = messages.shape[1]
    log_phi = np.log(compatibility(messages, w, beta_temp))
    S = _node_fields(g, tail, head, log_phi, k)
    logm = S[tail] - log_phi[rev]
    if field is not None:
        logm = logm + field[None, :]
    return _normalize_log(logm)


def _balance_field(S: np.ndarray, rounds: int = 50) -> np.ndarray:
    """Global field making the mean belief uniform over communities."""
    n, k = S.shape
    h = np.zeros(k)
    for _ in range(rounds):
        b = _normalize_log(S + h)
        mean = b.mean(axis=0)
        step = np.log(np.maximum(mean, 1e-300) * k)
        h -= step
        if np.max(np.abs(step)) < 1e-10:
            break
    return h - h.mean()


def weighted_bp(g: WeightedGraph, cfg: BpConfig | None = None) -> ClusteringResult:
    """Loopy BP with the weight-aware Potts factor; labels are the belief argmax.

    With ``cfg.balance`` a global field, refit every round, keeps the average
    belief uniform over communities (fixed, equal group sizes).
    """
    cfg = cfg or BpConfig()
    k = cfg.k
    rng = np.random.default_rng(cfg.seed)
    tail, head, w, rev = directed_edges(g)
    m2 = tail.size
    msgs = np.full((m2, k), 1.0 / k)
    if cfg.noise > 0:
        msgs = msgs + rng.uniform(-cfg.noise, cfg.noise, size=(m2, k))
        msgs = np.clip(msgs, 1e-12, None)
        msgs /= msgs.sum(axis=1, keepdims=True)
    h = np.zeros(k)
    converged = False
    it = 0
    delta = float("nan")
    for it in range(1, cfg.max_iters + 1):
        log_phi = np.log(compatibility(msgs, w, cfg.beta_temp))
        S = _node_fields(g, tail, head, log_phi, k)
        if cfg.balance:
            h = _balance_field(S)
        new = _normalize_log(S[tail] - log_phi[rev] + h[None, :])
        new = cfg.damping * msgs + (1.0 - cfg.damping) * new
        delta = float(np.max(np.abs(new - msgs))) if m2 else 0.0
        msgs = new
        if delta < cfg.tol:
            converged = True
            break
    log_phi = np.log(compatibility(msgs, w, cfg.beta_temp))
    S = _node_fields(g, tail, head, log_phi, k)
    beliefs = _normalize_log(S + h[None, :])
    hard = beliefs.argmax(axis=1).astype(np.int64)
    diag = {"iterations": it, "converged": converged, "max_delta": delta}
    return ClusteringResult(beliefs, hard, diag)
