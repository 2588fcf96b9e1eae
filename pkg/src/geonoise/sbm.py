"""Latent-kernel stochastic block model: sampling, kernel constant, thresholds.

Each node gets a uniform latent position in ``[0, 1]^d`` and a fair-coin
label.  A pair ``(i, j)`` becomes an edge with probability

    B[z_i, z_j] * exp(-||x_i - x_j||^2 / (2 sigma^2))

where ``B`` is ``a log(n)/n`` inside a block and ``b log(n)/n`` across.
Averaging the kernel over positions gives the classical SBM with rates
scaled by ``c(sigma)``, which is what the recovery thresholds use.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from geonoise.graph import WeightedGraph, from_arrays, write_edgelist

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SbmParams:
    n: int
    a: float
    b: float
    sigma: float
    d: int = 2
    balanced: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise ValueError(f"latent dimension must be >= 1, got {self.d}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.b > 0 and self.a > 0):
            raise ValueError("a and b must be positive")

    @property
    def p_in(self) -> float:
        return self.a * math.log(self.n) / self.n

    @property
    def p_out(self) -> float:
        return self.b * math.log(self.n) / self.n


@dataclass
class SbmSample:
    graph: WeightedGraph
    labels: np.ndarray
    positions: np.ndarray
    params: SbmParams
    n_clipped: int = 0


@dataclass(frozen=True)
class ThresholdReport:
    c_sigma: float
    t_exact: float
    t_weak_lhs: float
    t_weak_rhs: float
    exact_recoverable: bool
    weak_recoverable: bool

    def as_dict(self) -> dict:
        return {
            "c_sigma": self.c_sigma,
            "t_exact": self.t_exact,
            "t_weak_lhs": self.t_weak_lhs,
            "t_weak_rhs": self.t_weak_rhs,
            "exact_recoverable": self.exact_recoverable,
            "weak_recoverable": self.weak_recoverable,
        }


def rbf_kernel(sq_dist, sigma: float):
    return np.exp(-np.asarray(sq_dist) / (2.0 * sigma * sigma))


def estimate_kernel_constant(
    d: int, sigma: float, n_samples: int = 1_000_000, seed: int = 0
) -> float:
    """Monte Carlo estimate of ``E exp(-||x - y||^2 / 2 sigma^2)`` for uniform x, y."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    remaining = n_samples
    chunk = 1 << 18
    while remaining > 0:
        m = min(chunk, remaining)
        x = rng.random((m, d))
        y = rng.random((m, d))
        total += rbf_kernel(((x - y) ** 2).sum(axis=1), sigma).sum()
        remaining -= m
    return float(total / n_samples)


def _draw_labels(rng: np.random.Generator, n: int, balanced: bool) -> np.ndarray:
    if balanced:
        labels = np.zeros(n, dtype=np.int64)
        labels[n // 2 :] = 1
        rng.shuffle(labels)
        return labels
    return rng.integers(0, 2, size=n).astype(np.int64)


def sample_lk_sbm(params: SbmParams, seed: int) -> SbmSample:
    """Draw positions, labels and edges of one latent-kernel SBM instance."""
    rng = np.random.default_rng(seed)
    n = params.n
    positions = rng.random((n, params.d))
    labels = _draw_labels(rng, n, params.balanced)

    iu, ju = np.triu_indices(n, k=1)
    sq = ((positions[iu] - positions[ju]) ** 2).sum(axis=1)
    base = np.where(labels[iu] == labels[ju], params.p_in, params.p_out)
    prob = base * rbf_kernel(sq, params.sigma)
    n_clipped = int(np.count_nonzero(prob > 1.0))
    if n_clipped:
        log.warning("clipped %d pair probabilities to 1", n_clipped)
        prob = np.minimum(prob, 1.0)
    keep = rng.random(prob.size) < prob
    graph = from_arrays(n, iu[keep], ju[keep])
    return SbmSample(graph, labels, positions, params, n_clipped)


def recovery_thresholds(a: float, b: float, c_sigma: float) -> ThresholdReport:
    """Exact and weak recovery tests for rates ``c a log n / n`` and ``c b log n / n``.

    Both comparisons are strict, so a value sitting exactly on the boundary
    is reported as not recoverable.
    """
    if not 0 < c_sigma <= 1:
        raise ValueError(f"c_sigma must lie in (0, 1], got {c_sigma}")
    ca, cb = c_sigma * a, c_sigma * b
    # expanded form avoids the rounding of two square roots when ca * cb is a perfect square
    t_exact = max(ca + cb - 2.0 * math.sqrt(ca * cb), 0.0)
    lhs = (ca - cb) ** 2
    rhs = 2.0 * (ca + cb)
    return ThresholdReport(
        c_sigma=float(c_sigma),
        t_exact=t_exact,
        t_weak_lhs=lhs,
        t_weak_rhs=rhs,
        exact_recoverable=t_exact > 2.0,
        weak_recoverable=lhs > rhs,
    )


def write_sample(sample: SbmSample, prefix: str | os.PathLike) -> tuple[str, str]:
    """Write ``<prefix>.edges`` and the ``<prefix>.nodes`` sidecar.

    Sidecar lines are ``node_id label x_1 ... x_d``.
    """
    prefix = os.fspath(prefix)
    edge_path, node_path = prefix + ".edges", prefix + ".nodes"
    write_edgelist(sample.graph, edge_path)
    with open(node_path, "w") as fh:
        for i, (z, x) in enumerate(zip(sample.labels, sample.positions)):
            coords = " ".join(f"{v:.17g}" for v in x)
            fh.write(f"{i} {z} {coords}\n")
    return edge_path, node_path


def read_nodes(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Read a node sidecar back into ``(labels, positions)``."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
    rows.sort(key=lambda r: int(r[0]))
    labels = np.array([int(r[1]) for r in rows], dtype=np.int64)
    positions = np.array([[float(v) for v in r[2:]] for r in rows])
    return labels, positions
