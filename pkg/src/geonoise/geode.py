"""Iterative geometric denoising (GeoDe).

Each round clusters the current weighted graph twice: into ``K`` communities
(C-step) and into ``B >> K`` tight geometric balls (G-step).  Edges whose
scores clear percentile cuts are shrunk, the top slice is boosted, and
the shrink/boost strengths decay over rounds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
import scipy.sparse as sp

from geonoise import baselines
from geonoise.graph import WeightedGraph
from geonoise.maso import MasoConfig, maso_operator, partition_operator
from geonoise.spectral import ClusteringResult, SpectralError, symmetric_eigs

log = logging.getLogger(__name__)

ROUTINES = ("maso", "bethe_hessian", "nonbacktracking", "motif_laplacian")


@dataclass(frozen=True)
class GeoDeConfig:
    K: int = 2
    B: int = 32
    tau_C: float = 0.90
    tau_G: float = 0.90
    tau_C_plus: float = 0.97
    tau_G_plus: float = 0.97
    shrink_comm: float = 1.00
    shrink_geo: float = 0.80
    boost_comm: float = 0.60
    boost_geo: float = 0.40
    decay_mode: str = "linear"
    anneal_steps: int = 6
    warmup_rounds: int = 2
    w_min: float = 0.05
    w_max: float = 4.0
    T: int = 50
    P: int = 7
    tol: float = 1e-5
    spec_comm: str = "maso"
    spec_geom: str = "maso"
    gamma: float = 1.0
    seed: int = 0
    maso: MasoConfig = field(default_factory=MasoConfig)

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.B <= self.K:
            raise ValueError(f"B must exceed K (got B={self.B}, K={self.K})")
        for lo, hi, name in ((self.tau_C, self.tau_C_plus, "C"), (self.tau_G, self.tau_G_plus, "G")):
            if not (0 < lo < 1 and 0 < hi < 1):
                raise ValueError(f"percentile cuts for {name} must lie in (0, 1)")
            if not hi > lo:
                raise ValueError(f"boost cut tau_{name}+ must exceed shrink cut tau_{name}")
        if not 0 < self.w_min < self.w_max:
            raise ValueError("need 0 < w_min < w_max")
        for name in ("shrink_comm", "shrink_geo", "boost_comm", "boost_geo"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.shrink_comm > 1 or self.shrink_geo > 1:
            raise ValueError("shrink rates must not exceed 1")
        if self.decay_mode not in ("linear", "inverse_linear"):
            raise ValueError(f"unknown decay mode {self.decay_mode!r}")
        if self.T < 0 or self.P < 1 or self.anneal_steps < 1 or self.warmup_rounds < 0:
            raise ValueError("T >= 0, P >= 1, anneal_steps >= 1, warmup_rounds >= 0 required")
        for name in (self.spec_comm, self.spec_geom):
            if name not in ROUTINES:
                raise ValueError(f"unknown spectral routine {name!r}; choose from {ROUTINES}")
        if self.shrink_geo > self.gamma * self.shrink_comm or self.boost_geo > self.gamma * self.boost_comm:
            log.warning(
                "geometry rates exceed gamma=%g times community rates; "
                "the step-size ratio condition of the convergence result does not hold",
                self.gamma,
            )

    @classmethod
    def single_rate(cls, lambda_s: float, lambda_b: float, **kw) -> "GeoDeConfig":
        """One shrink and one boost strength shared by both steps."""
        return cls(shrink_comm=lambda_s, shrink_geo=lambda_s, boost_comm=lambda_b, boost_geo=lambda_b, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["maso"] = asdict(self.maso)
        return out


@dataclass
class StepResult:
    """Scores and flagged edges of one C- or G-step.

    ``scores`` is aligned with the graph's edge arrays; G-step edges whose
    endpoints sit in different balls carry NaN.  ``shrink`` and ``boost``
    are boolean masks over edges.
    """

    Q: np.ndarray
    hard: np.ndarray
    scores: np.ndarray
    shrink: np.ndarray
    boost: np.ndarray
    eligible: np.ndarray

    def shrink_pairs(self, g: WeightedGraph) -> set:
        return _pairs(g, self.shrink)

    def boost_pairs(self, g: WeightedGraph) -> set:
        return _pairs(g, self.boost)


def _pairs(g, mask) -> set:
    return {(int(i), int(j)) for i, j in zip(g.src[mask], g.dst[mask])}


@dataclass
class IterationRecord:
    t: int
    objective: float
    lambda_s: float
    lambda_b: float
    n_shrink: int
    n_boost: int
    n_edges: int
    noise: float
    seconds: float
    lambda_s_geo: float
    lambda_b_geo: float


@dataclass
class GeoDeTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    failure: str | None = None

    CSV_FIELDS = [f.name for f in fields(IterationRecord)]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def objectives(self) -> list[float]:
        return [r.objective for r in self.records]

    def noise_series(self) -> list[tuple[int, float]]:
        return [(r.t, r.noise) for r in self.records if not math.isnan(r.noise)]

    def write_csv(self, path, include_runtime: bool = True) -> None:
        """One row per iteration; ``include_runtime=False`` drops the wall-clock column."""
        cols = [c for c in self.CSV_FIELDS if include_runtime or c != "seconds"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r in self.records:
                writer.writerow([_fmt(getattr(r, name)) for name in cols])

    def to_dict(self, include_runtime: bool = True) -> dict:
        recs = [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(r).items()}
                for r in self.records]
        if not include_runtime:
            for r in recs:
                r.pop("seconds")
        return {"stop_reason": self.stop_reason, "failure": self.failure, "records": recs}

    def write_json(self, path, include_runtime: bool = True) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(include_runtime), fh, indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


@dataclass
class GeoDeResult:
    soft: np.ndarray
    hard: np.ndarray
    trace: GeoDeTrace
    graph: WeightedGraph

    def __iter__(self):
        # allows ``Q, z, trace = run_geode(...)``-style unpacking of the first three
        return iter((self.soft, self.hard, self.trace))


# --- spectral routines ------------------------------------------------------


def spectral_routine(name: str, maso_config: MasoConfig | None = None) -> Callable:
    """``f(g, k, seed) -> ClusteringResult`` for a named operator."""
    maso_config = maso_config or MasoConfig()
    if name == "maso":
        def run(g, k, seed):
            stack = maso_operator(g, maso_config, seed)
            return partition_operator(stack, maso_config.with_k(k), seed)
        return run
    table = {
        "bethe_hessian": baselines.bethe_hessian_cluster,
        "nonbacktracking": baselines.nonbacktracking_cluster,
        "motif_laplacian": baselines.motif_laplacian_cluster,
    }
    if name not in table:
        raise ValueError(f"unknown spectral routine {name!r}")
    return table[name]


def _run_both(g: WeightedGraph, cfg: GeoDeConfig, seed: int) -> tuple[ClusteringResult, ClusteringResult]:
    """Community and geometry clusterings of the same graph.

    When both steps use MASO the operator is built once and partitioned twice.
    """
    B = min(cfg.B, g.n - 1)
    if cfg.spec_comm == cfg.spec_geom == "maso":
        stack = maso_operator(g, cfg.maso, seed)
        comm = partition_operator(stack, cfg.maso.with_k(cfg.K), seed)
        geom = partition_operator(stack, cfg.maso.with_k(B), seed)
        return comm, geom
    comm = spectral_routine(cfg.spec_comm, cfg.maso)(g, cfg.K, seed)
    geom = spectral_routine(cfg.spec_geom, cfg.maso)(g, B, seed)
    return comm, geom


# --- steps --------------------------------------------------------------------


def percentile_sets(scores: np.ndarray, eligible: np.ndarray, tau: float, tau_plus: float):
    """Edges scoring strictly above the ``tau`` / ``tau_plus`` quantile of the eligible scores."""
    shrink = np.zeros(scores.shape, dtype=bool)
    boost = np.zeros(scores.shape, dtype=bool)
    if eligible.any():
        vals = scores[eligible]
        lo, hi = np.quantile(vals, [tau, tau_plus])
        shrink[eligible] = vals > lo
        boost[eligible] = vals > hi
    return shrink, boost


def community_scores(g: WeightedGraph, Q: np.ndarray) -> np.ndarray:
    """``p_ij = sum_k Q_ik Q_jk``: probability that both endpoints share a block."""
    return np.einsum("ij,ij->i", Q[g.src], Q[g.dst])


def geometry_scores(g: WeightedGraph, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean top-ball confidence for same-ball edges; NaN for the rest."""
    z = Q.argmax(axis=1)
    conf = Q[np.arange(Q.shape[0]), z]
    same = z[g.src] == z[g.dst]
    scores = np.full(g.num_edges, np.nan)
    scores[same] = 0.5 * (conf[g.src[same]] + conf[g.dst[same]])
    return scores, same


def c_step_from(g: WeightedGraph, res: ClusteringResult, cfg: GeoDeConfig) -> StepResult:
    p = community_scores(g, res.soft)
    eligible = np.ones(g.num_edges, dtype=bool)
    shrink, boost = percentile_sets(p, eligible, cfg.tau_C, cfg.tau_C_plus)
    return StepResult(res.soft, res.hard, p, shrink, boost, eligible)


def g_step_from(g: WeightedGraph, res: ClusteringResult, cfg: GeoDeConfig) -> StepResult:
    c, same = geometry_scores(g, res.soft)
    shrink, boost = percentile_sets(c, same, cfg.tau_G, cfg.tau_G_plus)
    return StepResult(res.soft, res.soft.argmax(axis=1), c, shrink, boost, same)


def c_step(g: WeightedGraph, cfg: GeoDeConfig, seed: int | None = None) -> StepResult:
    seed = cfg.seed if seed is None else seed
    res = spectral_routine(cfg.spec_comm, cfg.maso)(g, cfg.K, seed)
    return c_step_from(g, res, cfg)


def g_step(g: WeightedGraph, cfg: GeoDeConfig, seed: int | None = None) -> StepResult:
    seed = cfg.seed if seed is None else seed
    B = min(cfg.B, g.n - 1)
    if B < cfg.B:
        log.info("reducing geometry balls from %d to %d", cfg.B, B)
    res = spectral_routine(cfg.spec_geom, cfg.maso)(g, B, seed)
    return g_step_from(g, res, cfg)


def decay(lambda_s: float, lambda_b: float, t: int, cfg: GeoDeConfig) -> tuple[float, float]:
    """Strengths at round ``t`` given their initial values.

    No decay during the first ``warmup_rounds`` rounds; afterwards either a
    linear ramp to zero over ``anneal_steps`` rounds or ``1 / (1 + t)``.
    """
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    s = t - cfg.warmup_rounds
    if s <= 0:
        return lambda_s, lambda_b
    if cfg.decay_mode == "linear":
        f = max(0.0, 1.0 - s / cfg.anneal_steps)
    else:
        f = 1.0 / (1.0 + s)
    return lambda_s * f, lambda_b * f


def rescale(
    g: WeightedGraph,
    edge_set,
    lam,
    mode: str,
    w_min: float,
    w_max: float,
) -> WeightedGraph:
    """Shrink ``w -> max(w_min, (1 - lam) w)`` or boost ``w -> min(w_max, (1 + lam) w)``.

    ``edge_set`` is a boolean edge mask or an iterable of ``(i, j)`` pairs;
    ``lam`` may be a scalar or a per-edge array.
    """
    mask = _edge_mask(g, edge_set)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), g.weights.shape)
    if np.any(lam[mask] < 0):
        raise ValueError("rescale strength must be nonnegative")
    w = g.weights.copy()
    if mode == "shrink":
        w[mask] = np.maximum(w_min, (1.0 - lam[mask]) * w[mask])
    elif mode == "boost":
        w[mask] = np.minimum(w_max, (1.0 + lam[mask]) * w[mask])
    else:
        raise ValueError(f"mode must be 'shrink' or 'boost', got {mode!r}")
    return g.with_weights(w)


def _edge_mask(g: WeightedGraph, edge_set) -> np.ndarray:
    if isinstance(edge_set, np.ndarray) and edge_set.dtype == bool:
        if edge_set.shape != g.weights.shape:
            raise ValueError("edge mask does not match the graph")
        return edge_set
    mask = np.zeros(g.num_edges, dtype=bool)
    for i, j in edge_set:
        k = g.edge_index(i, j)
        if k is None:
            raise KeyError(f"edge ({i}, {j}) is not in the graph")
        mask[k] = True
    return mask


def no_progress(history, P: int, tol: float) -> bool:
    """True when the last ``P + 1`` objectives all sit within ``tol`` of the last one."""
    if P < 1:
        raise ValueError("patience must be >= 1")
    if len(history) < P + 1:
        return False
    tail = np.asarray(history[-(P + 1):], dtype=float)
    return bool(np.all(np.abs(tail - tail[-1]) <= tol))


# --- noise metric ---------------------------------------------------------------


@dataclass
class NoiseFit:
    value: float
    intercept: float
    slope: float
    degenerate: bool


def noise_fit(distances: np.ndarray, targets: np.ndarray) -> NoiseFit:
    """OLS fit ``target ~ alpha - beta * distance``; mean squared residual of the clipped prediction."""
    d = np.asarray(distances, dtype=float)
    c = np.asarray(targets, dtype=float)
    degenerate = np.ptp(d) == 0 if d.size else True
    if degenerate:
        alpha, beta = float(c.mean()), 0.0
    else:
        X = np.column_stack([np.ones_like(d), -d])
        (alpha, beta), *_ = np.linalg.lstsq(X, c, rcond=None)
    pred = np.clip(alpha - beta * d, 0.0, 1.0)
    return NoiseFit(float(np.mean((c - pred) ** 2)), float(alpha), float(beta), bool(degenerate))


def stratified_pairs(g: WeightedGraph, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``ceil(m/2)`` edges and ``floor(m/2)`` uniformly drawn non-adjacent pairs."""
    n_edge = (m + 1) // 2
    n_non = m // 2
    if g.num_edges:
        pick = rng.choice(g.num_edges, size=n_edge, replace=n_edge > g.num_edges)
        ei, ej = g.src[pick], g.dst[pick]
    else:
        ei = ej = np.zeros(0, dtype=np.int64)
    total_pairs = g.n * (g.n - 1) // 2
    ni, nj = [], []
    if total_pairs > g.num_edges:
        while len(ni) < n_non:
            i, j = rng.integers(0, g.n, size=2)
            if i == j or g.has_edge(i, j):
                continue
            ni.append(min(i, j))
            nj.append(max(i, j))
    return (
        np.concatenate([ei, np.asarray(ni, dtype=np.int64)]),
        np.concatenate([ej, np.asarray(nj, dtype=np.int64)]),
    )


def geometric_noise_metric(
    g: WeightedGraph,
    coords: np.ndarray | None,
    m: int = 2000,
    seed: int = 0,
    detail: bool = False,
    pair_distance: Callable | None = None,
):
    """Mean squared residual of a linear distance-to-confidence fit on a stratified pair sample.

    Confidence is ``min(w_ij / w_max, 1)`` with ``w_max`` the current largest
    weight, zero for absent pairs.  Distances are Euclidean in ``coords``
    unless ``pair_distance(i, j)`` (vectorised over index arrays) is given.
    """
    if m < 2:
        raise ValueError("sample size m must be >= 2")
    rng = np.random.default_rng(seed)
    pi, pj = stratified_pairs(g, m, rng)
    w_max = float(g.weights.max()) if g.num_edges else 1.0
    w = np.array([g.weight(i, j) for i, j in zip(pi, pj)])
    conf = np.minimum(w / w_max, 1.0)
    if pair_distance is not None:
        dist = np.asarray(pair_distance(pi, pj), dtype=float)
    else:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        dist = np.linalg.norm(coords[pi] - coords[pj], axis=1)
    fit = noise_fit(dist, conf)
    return fit if detail else fit.value


def spectral_coordinates(g: WeightedGraph, dim: int = 2, seed: int = 0) -> np.ndarray:
    """Rank-``dim`` spectral embedding of the normalised adjacency (leading direction dropped)."""
    A = g.adjacency()
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    N = sp.diags(inv) @ A @ sp.diags(inv)
    _, vecs = symmetric_eigs(N, dim + 1, largest=True, seed=seed)
    return vecs[:, 1 : dim + 1]


# --- main loop ---------------------------------------------------------------------


def run_geode(
    g: WeightedGraph,
    cfg: GeoDeConfig | None = None,
    coords: np.ndarray | None = None,
    noise_samples: int = 2000,
    on_iteration: Callable | None = None,
    pair_distance: Callable | None = None,
) -> GeoDeResult:
    """Alternate C- and G-steps, reweighting edges until no progress or ``T`` rounds.

    When ``coords`` (or ``pair_distance``) is given the geometric-noise metric
    is recorded after each reweighting.  ``on_iteration(t, graph, c_res, g_res)`` is called with the
    step results of every round (before reweighting).
    """
    cfg = cfg or GeoDeConfig()
    if g.num_edges == 0:
        raise ValueError("GeoDe needs a graph with at least one edge")
    seed = cfg.seed
    trace = GeoDeTrace()
    cur = g
    if cfg.T == 0:
        res = spectral_routine(cfg.spec_comm, cfg.maso)(g, cfg.K, seed)
        trace.stop_reason = "T=0"
        return GeoDeResult(res.soft, res.soft.argmax(axis=1), trace, g)

    Q = None
    history: list[float] = []
    for t in range(1, cfg.T + 1):
        t0 = time.perf_counter()
        try:
            comm, geom = _run_both(cur, cfg, seed)
        except (SpectralError, np.linalg.LinAlgError) as exc:
            if Q is None:
                raise
            trace.failure = f"round {t}: {exc}"
            trace.stop_reason = "failure"
            log.warning("GeoDe stopped early: %s", exc)
            break
        cs = c_step_from(cur, comm, cfg)
        gs = g_step_from(cur, geom, cfg)
        Q = cs.Q
        if on_iteration is not None:
            on_iteration(t, cur, cs, gs)

        ls_c, lb_c = decay(cfg.shrink_comm, cfg.boost_comm, t, cfg)
        ls_g, lb_g = decay(cfg.shrink_geo, cfg.boost_geo, t, cfg)
        shrink = cs.shrink | gs.shrink
        boost = cs.boost | gs.boost
        # an edge flagged by both sources takes the stronger rate
        lam_s = np.where(cs.shrink, ls_c, 0.0)
        lam_s = np.maximum(lam_s, np.where(gs.shrink, ls_g, 0.0))
        lam_b = np.where(cs.boost, lb_c, 0.0)
        lam_b = np.maximum(lam_b, np.where(gs.boost, lb_g, 0.0))
        cur = rescale(cur, shrink, lam_s, "shrink", cfg.w_min, cfg.w_max)
        cur = rescale(cur, boost, lam_b, "boost", cfg.w_min, cfg.w_max)

        objective = float(Q.max(axis=1).sum())
        history.append(objective)
        noise = float("nan")
        if coords is not None or pair_distance is not None:
            noise = geometric_noise_metric(cur, coords, noise_samples, seed, pair_distance=pair_distance)
        trace.records.append(
            IterationRecord(
                t=t, objective=objective, lambda_s=ls_c, lambda_b=lb_c,
                n_shrink=int(shrink.sum()), n_boost=int(boost.sum()),
                n_edges=cur.num_edges, noise=noise,
                seconds=time.perf_counter() - t0,
                lambda_s_geo=ls_g, lambda_b_geo=lb_g,
            )
        )
        if no_progress(history, cfg.P, cfg.tol):
            trace.stop_reason = "no_progress"
            break
        if cur.num_edges == 0:
            trace.stop_reason = "empty"
            break
    else:
        trace.stop_reason = "max_iters"
    return GeoDeResult(Q, Q.argmax(axis=1), trace, cur)
