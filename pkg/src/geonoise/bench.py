"""Accuracy metrics, synthetic sweeps over the kernel bandwidth, threshold validation
and trend tests for noise traces."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment

from geonoise import baselines
from geonoise.baselines import BpConfig
from geonoise.geode import GeoDeConfig, run_geode
from geonoise.maso import MasoConfig, maso_cluster
from geonoise.sbm import SbmParams, SbmSample, estimate_kernel_constant, recovery_thresholds, sample_lk_sbm

log = logging.getLogger(__name__)


def permutation_accuracy(pred, truth) -> float:
    """Largest fraction of agreeing labels over all relabelings of ``pred``."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        return 1.0
    k = int(max(pred.max(), truth.max())) + 1
    if k <= 2:
        acc = float(np.mean(pred == truth))
        return max(acc, 1.0 - acc)
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (pred, truth), 1)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    return float(conf[rows, cols].sum()) / pred.size


# --- method registry ---------------------------------------------------------------


@dataclass(frozen=True)
class MethodSettings:
    maso: MasoConfig = field(default_factory=MasoConfig)
    geode: GeoDeConfig = field(default_factory=GeoDeConfig)
    bp: BpConfig = field(default_factory=BpConfig)


def _maso(g, seed, s: MethodSettings):
    return maso_cluster(g, s.maso, seed).hard


def _geode(g, seed, s: MethodSettings):
    return run_geode(g, replace(s.geode, seed=seed, maso=s.maso)).hard


def _bp(g, seed, s: MethodSettings):
    return baselines.weighted_bp(g, replace(s.bp, seed=seed)).hard


METHODS: dict[str, Callable] = {
    "maso": _maso,
    "bethe_hessian": lambda g, seed, s: baselines.bethe_hessian_cluster(g, 2, seed).hard,
    "nonbacktracking": lambda g, seed, s: baselines.nonbacktracking_cluster(g, 2, seed).hard,
    "motif_laplacian": lambda g, seed, s: baselines.motif_laplacian_cluster(g, 2, seed).hard,
    "geode_maso": _geode,
    "bp": _bp,
}


# --- sweep --------------------------------------------------------------------


@dataclass(frozen=True)
class BenchConfig:
    sigma_grid: tuple = (0.75, 0.5, 0.25, 0.1)
    replicates: int = 5
    n_range: tuple = (100, 1000)
    a_range: tuple = (15.0, 100.0)
    b_range: tuple = (1.0, 50.0)
    methods: tuple = ("maso", "bethe_hessian", "nonbacktracking", "motif_laplacian")
    seed: int = 0
    d: int = 2
    balanced: bool = False
    kernel_samples: int = 1_000_000
    settings: MethodSettings = field(default_factory=MethodSettings)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.sigma_grid:
            raise ValueError("sigma_grid is empty")
        if any(not s > 0 for s in self.sigma_grid):
            raise ValueError("every sigma must be positive")
        for name in ("n_range", "a_range", "b_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty: {lo} > {hi}")
        if self.n_range[0] < 2:
            raise ValueError("n must be >= 2")
        if self.a_range[1] <= self.b_range[0]:
            raise ValueError("no (a, b) pair with a > b exists in the given ranges")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["settings"] = {
            "maso": asdict(self.settings.maso),
            "geode": self.settings.geode.to_dict(),
            "bp": asdict(self.settings.bp),
        }
        return out


@dataclass
class RunRecord:
    sigma: float
    replicate: int
    n: int
    a: float
    b: float
    seed: int
    method: str
    accuracy: float
    seconds: float
    c_sigma: float
    t_exact: float
    recoverable: bool
    recovered: bool
    graph_digest: str
    error: str = ""


RECORD_FIELDS = [f.name for f in fields(RunRecord)]


def cell_seed(master: int, sigma_index: int, replicate: int) -> int:
    """Deterministic per-cell seed independent of execution order."""
    ss = np.random.SeedSequence([master, sigma_index, replicate])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def draw_params(rng: np.random.Generator, cfg: BenchConfig) -> tuple[int, float, float]:
    """``n`` uniform on the integer range; ``(a, b)`` uniform, resampled until ``a > b``."""
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    while True:
        a = float(rng.uniform(*cfg.a_range))
        b = float(rng.uniform(*cfg.b_range))
        if a > b:
            return n, a, b


Sampler = Callable[[float, int, int], SbmSample]


def _run_cell(cfg: BenchConfig, si: int, rep: int, c_sigma: float, sampler: Sampler | None) -> list[RunRecord]:
    sigma = cfg.sigma_grid[si]
    seed = cell_seed(cfg.seed, si, rep)
    if sampler is None:
        rng = np.random.default_rng(seed)
        n, a, b = draw_params(rng, cfg)
        sample = sample_lk_sbm(SbmParams(n, a, b, sigma, cfg.d, cfg.balanced), seed)
    else:
        sample = sampler(sigma, rep, seed)
    p = sample.params
    th = recovery_thresholds(p.a, p.b, c_sigma)
    digest = sample.graph.digest()
    out = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        err = ""
        try:
            acc = permutation_accuracy(METHODS[method](sample.graph, seed, cfg.settings), sample.labels)
        except Exception as exc:  # a failed run is recorded, the sweep goes on
            log.warning("%s failed on sigma=%g rep=%d: %s", method, sigma, rep, exc)
            acc, err = float("nan"), f"{type(exc).__name__}: {exc}"
        out.append(
            RunRecord(
                sigma=sigma, replicate=rep, n=p.n, a=p.a, b=p.b, seed=seed, method=method,
                accuracy=acc, seconds=time.perf_counter() - t0, c_sigma=c_sigma,
                t_exact=th.t_exact, recoverable=th.exact_recoverable,
                recovered=bool(acc == 1.0), graph_digest=digest, error=err,
            )
        )
    return out


def _cell_job(args):
    return _run_cell(*args)


def run_benchmark(
    cfg: BenchConfig,
    sampler: Sampler | None = None,
    jobs: int = 1,
    on_cell: Callable | None = None,
) -> list[RunRecord]:
    """Run every method on the same sampled graph for each (sigma, replicate) cell.

    ``sampler(sigma, replicate, seed)`` replaces the latent-kernel generator.
    Records come back ordered by (sigma, replicate, method) whatever ``jobs`` is.
    """
    c_by_sigma = [estimate_kernel_constant(cfg.d, s, cfg.kernel_samples, cfg.seed) for s in cfg.sigma_grid]
    cells = [(cfg, si, rep, c_by_sigma[si], sampler) for si in range(len(cfg.sigma_grid)) for rep in range(cfg.replicates)]
    records: list[RunRecord] = []
    if jobs > 1 and sampler is None:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for recs in pool.map(_cell_job, cells):
                records.extend(recs)
                if on_cell:
                    on_cell(recs)
    else:
        for cell in cells:
            recs = _run_cell(*cell)
            records.extend(recs)
            if on_cell:
                on_cell(recs)
    return records


@dataclass
class SummaryRow:
    method: str
    sigma: float
    runs: int
    failed: int
    mean_accuracy: float
    std_error: float
    min_accuracy: float
    max_accuracy: float
    mean_seconds: float


def summarize(records: Sequence[RunRecord]) -> list[SummaryRow]:
    """Mean accuracy with standard error per (method, sigma), in first-seen order."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.method, r.sigma), []).append(r)
    rows = []
    for (method, sigma), recs in groups.items():
        acc = np.array([r.accuracy for r in recs if not r.error])
        secs = np.array([r.seconds for r in recs])
        if acc.size:
            se = float(acc.std(ddof=1) / math.sqrt(acc.size)) if acc.size > 1 else 0.0
            row = SummaryRow(method, sigma, len(recs), len(recs) - acc.size, float(acc.mean()), se,
                             float(acc.min()), float(acc.max()), float(secs.mean()))
        else:
            nan = float("nan")
            row = SummaryRow(method, sigma, len(recs), len(recs), nan, nan, nan, nan, float(secs.mean()))
        rows.append(row)
    return rows


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def write_records_csv(records: Sequence[RunRecord], path, include_runtime: bool = False) -> None:
    """Records table.  Wall-clock time is left out by default so the file is reproducible."""
    cols = [c for c in RECORD_FIELDS if include_runtime or c != "seconds"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_cell(getattr(r, c)) for c in cols])


def write_summary_csv(rows: Sequence[SummaryRow], path, include_runtime: bool = False) -> None:
    cols = [f.name for f in fields(SummaryRow) if include_runtime or f.name != "mean_seconds"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in cols])


def write_manifest(path, config: dict, extra: dict | None = None) -> None:
    doc = {"config": config}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# --- threshold validation -----------------------------------------------------------


@dataclass
class ThresholdValidation:
    match: int
    mismatch: int
    dots: list

    @property
    def match_fraction(self) -> float:
        total = self.match + self.mismatch
        return self.match / total if total else float("nan")


def threshold_validation(records: Sequence[RunRecord]) -> ThresholdValidation:
    """A run matches when the exact-recovery prediction agrees with the outcome."""
    match = mismatch = 0
    dots = []
    for r in records:
        if r.error:
            continue
        ok = r.recoverable == r.recovered
        match += ok
        mismatch += not ok
        dots.append({
            "method": r.method, "sigma": r.sigma, "a": r.a, "b": r.b,
            "ca": r.c_sigma * r.a, "cb": r.c_sigma * r.b,
            "recoverable": r.recoverable, "recovered": r.recovered, "match": ok,
        })
    return ThresholdValidation(match, mismatch, dots)


# --- trend and paired tests ------------------------------------------------------------


def slope_significance(trace) -> tuple[float, float]:
    """OLS slope of ``value`` on ``t`` and its two-sided p-value against zero slope.

    A perfect fit gives p = 0 for a nonzero slope; a constant series gives
    slope 0 and p = 1.
    """
    arr = np.asarray(trace, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("trace must be a sequence of (t, value) pairs")
    if arr.shape[0] < 3:
        raise ValueError("need at least 3 points")
    t, y = arr[:, 0], arr[:, 1]
    if np.ptp(t) == 0:
        raise ValueError("degenerate abscissa: all t equal")
    n = t.size
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * tc
    sse = float(resid @ resid)
    if sse <= 0.0:
        return slope, (1.0 if slope == 0.0 else 0.0)
    se = math.sqrt(sse / (n - 2) / sxx)
    tstat = slope / se
    return slope, float(2.0 * stats.t.sf(abs(tstat), n - 2))


def paired_greater(x, y) -> tuple[float, float]:
    """Mean of ``x - y`` and the one-sided paired t-test p-value for ``mean > 0``."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if diff.size < 2:
        raise ValueError("need at least two pairs")
    mean = float(diff.mean())
    if np.ptp(diff) == 0:
        return mean, (0.0 if mean > 0 else 1.0)
    res = stats.ttest_1samp(diff, 0.0, alternative="greater")
    return mean, float(res.pvalue)
