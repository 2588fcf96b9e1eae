"""``geonoise`` command line: generate, cluster, geode, bp, bench, noise, thresholds."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from geonoise import __version__, baselines
from geonoise.bench import (
    permutation_accuracy,
    run_benchmark,
    slope_significance,
    summarize,
    threshold_validation,
    write_manifest,
    write_records_csv,
    write_summary_csv,
)
from geonoise.config import ConfigError, RunConfig, load_document, resolve, with_seed
from geonoise.geode import geometric_noise_metric, run_geode, spectral_coordinates
from geonoise.graph import read_edgelist, write_edgelist
from geonoise.ingest import load_attribute_graph
from geonoise.maso import maso_cluster
from geonoise.sbm import (
    SbmParams,
    estimate_kernel_constant,
    read_nodes,
    recovery_thresholds,
    sample_lk_sbm,
    write_sample,
)

log = logging.getLogger("geonoise")

CLUSTER_METHODS = ("maso", "bethe_hessian", "nonbacktracking", "motif_laplacian", "bp")


class UsageError(Exception):
    """Bad flags or configuration; exit status 2."""


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("usage", message)
        sys.exit(2)


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")


# --- shared helpers ------------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GEODE_SEED")
    if env is None or env == "":
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GEODE_SEED must be an integer, got {env!r}") from None


def _set(d: dict, block: str, key: str, value) -> None:
    if value is not None:
        d.setdefault(block, {})[key] = value


def _run_config(args, overrides: dict, default_preset: str = "synthetic") -> tuple[RunConfig, int]:
    try:
        doc = load_document(args.config) if args.config else {}
        preset = args.preset or doc.get("preset") or default_preset
        cfg = resolve(doc, overrides, preset)
    except (ConfigError, OSError) as exc:
        raise UsageError(str(exc)) from None
    seed = _resolve_seed(args)
    if seed is None:
        seed = cfg.geode.seed
    return with_seed(cfg, seed), seed


class Inputs:
    """Graph plus whatever side information came with it."""

    def __init__(self, args):
        self.paths = {"graph": args.graph}
        self.labels = None
        self.coords = None
        self.pair_distance = None
        self.node_ids = None
        if getattr(args, "attrs", None):
            ag = load_attribute_graph(args.graph, args.attrs, args.labels)
            self.graph = ag.graph
            self.labels = ag.labels
            self.pair_distance = ag.distance
            self.node_ids = ag.node_ids
            self.paths["attrs"] = args.attrs
            if args.labels:
                self.paths["labels"] = args.labels
        else:
            if getattr(args, "labels", None):
                raise UsageError("--labels needs --attrs; use --nodes for sidecar files")
            self.graph = read_edgelist(args.graph)
            if getattr(args, "nodes", None):
                labels, pos = read_nodes(args.nodes)
                if labels.size != self.graph.n:
                    raise ValueError(f"{args.nodes} lists {labels.size} nodes, graph has {self.graph.n}")
                self.labels, self.coords = labels, pos
                self.paths["nodes"] = args.nodes

    def ids(self) -> np.ndarray:
        return self.node_ids if self.node_ids is not None else np.arange(self.graph.n)

    def digests(self) -> dict:
        return {k: _sha256(v) for k, v in sorted(self.paths.items())}

    def accuracy(self, hard) -> float | None:
        if self.labels is None:
            return None
        return permutation_accuracy(hard, self.labels)


def _write_labels(path, ids, hard) -> None:
    with open(path, "w") as fh:
        for nid, z in zip(ids, hard):
            fh.write(f"{nid} {int(z)}\n")


def _write_soft(path, ids, soft) -> None:
    with open(path, "w") as fh:
        fh.write("node," + ",".join(f"q{k}" for k in range(soft.shape[1])) + "\n")
        for nid, row in zip(ids, soft):
            fh.write(f"{nid}," + ",".join(repr(float(v)) for v in row) + "\n")


def _write_edges(path, g, ids=None) -> None:
    if ids is None:
        write_edgelist(g, path)
        return
    with open(path, "w") as fh:
        for i, j, w in zip(g.src, g.dst, g.weights):
            fh.write(f"{ids[i]} {ids[j]} {w:.17g}\n")


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, NaN to null, timing keys dropped."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items() if not str(k).endswith("_seconds")}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _prefix(out: str) -> str:
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return out


def _finish(args, command: str, summary: dict, manifest_path: str | None, cfg: dict, extra: dict) -> None:
    summary = _clean(summary)
    if manifest_path:
        body = {"command": command, "version": __version__, "summary": summary}
        body.update(_clean(extra))
        write_manifest(manifest_path, _clean(cfg), body)
    if args.json:
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        for k in sorted(summary):
            sys.stdout.write(f"{k}: {summary[k]}\n")


# --- subcommands --------------------------------------------------------------------------


def cmd_generate(args) -> None:
    rc, seed = _run_config(args, {})
    params = SbmParams(args.n, args.a, args.b, args.sigma, args.d, args.balanced)
    sample = sample_lk_sbm(params, seed)
    prefix = _prefix(args.out)
    edges, nodes = write_sample(sample, prefix)
    summary = {
        "n": params.n, "edges": sample.graph.num_edges, "clipped_pairs": sample.n_clipped,
        "seed": seed, "graph_digest": sample.graph.digest(),
        "files": [os.path.basename(edges), os.path.basename(nodes)],
    }
    cfg = {"n": params.n, "a": params.a, "b": params.b, "sigma": params.sigma, "d": params.d,
           "balanced": params.balanced, "seed": seed}
    _finish(args, "generate", summary, prefix + ".manifest.json", cfg, {})


def _cluster(method: str, g, rc: RunConfig, k: int, seed: int):
    if method == "maso":
        return maso_cluster(g, rc.maso.with_k(k), seed)
    if method == "bp":
        return baselines.weighted_bp(g, replace(rc.bp, k=k, seed=seed))
    fn = {
        "bethe_hessian": baselines.bethe_hessian_cluster,
        "nonbacktracking": baselines.nonbacktracking_cluster,
        "motif_laplacian": baselines.motif_laplacian_cluster,
    }[method]
    return fn(g, k, seed)


def _maso_overrides(args) -> dict:
    ov: dict = {}
    _set(ov, "maso", "beta", getattr(args, "beta", None))
    _set(ov, "maso", "clip_max", getattr(args, "clip_max", None))
    _set(ov, "maso", "dim", getattr(args, "dim", None))
    return ov


def cmd_cluster(args) -> None:
    rc, seed = _run_config(args, _maso_overrides(args))
    inp = Inputs(args)
    res = _cluster(args.method, inp.graph, rc, args.k, seed)
    prefix = _prefix(args.out)
    _write_labels(prefix + ".labels", inp.ids(), res.hard)
    _write_soft(prefix + ".soft.csv", inp.ids(), res.soft)
    summary = {"method": args.method, "k": args.k, "seed": seed, "n": inp.graph.n,
               "edges": inp.graph.num_edges, "accuracy": inp.accuracy(res.hard)}
    if args.timings:
        summary["timings"] = {k[: -len("_seconds")]: v for k, v in res.diagnostics.items()
                              if k.endswith("_seconds")}
    _finish(args, "cluster", summary, prefix + ".manifest.json", rc.to_dict(),
            {"inputs": inp.digests(), "diagnostics": res.diagnostics})


def _geode_overrides(args) -> dict:
    ov = _maso_overrides(args)
    for key in ("T", "B", "P", "decay_mode", "spec_comm", "spec_geom"):
        _set(ov, "geode", key, getattr(args, key, None))
    return ov


def cmd_geode(args) -> None:
    rc, seed = _run_config(args, _geode_overrides(args))
    inp = Inputs(args)
    coords, pdist = (inp.coords, inp.pair_distance) if args.noise else (None, None)
    result = run_geode(inp.graph, rc.geode, coords=coords, pair_distance=pdist, noise_samples=args.samples)
    prefix = _prefix(args.out)
    ids = inp.ids()
    _write_labels(prefix + ".labels", ids, result.hard)
    _write_soft(prefix + ".soft.csv", ids, result.soft)
    result.trace.write_csv(prefix + ".trace.csv", include_runtime=args.timings)
    result.trace.write_json(prefix + ".trace.json", include_runtime=args.timings)
    _write_edges(prefix + ".denoised.edges", result.graph, inp.node_ids)
    summary = {"seed": seed, "iterations": len(result.trace), "stop_reason": result.trace.stop_reason,
               "failure": result.trace.failure, "accuracy": inp.accuracy(result.hard),
               "edges": result.graph.num_edges}
    _finish(args, "geode", summary, prefix + ".manifest.json", rc.to_dict(), {"inputs": inp.digests()})


def cmd_bp(args) -> None:
    ov: dict = {}
    _set(ov, "bp", "beta_temp", args.beta_temp)
    _set(ov, "bp", "damping", args.damping)
    _set(ov, "bp", "max_iters", args.max_iters)
    rc, seed = _run_config(args, ov)
    inp = Inputs(args)
    res = baselines.weighted_bp(inp.graph, replace(rc.bp, k=args.k))
    prefix = _prefix(args.out)
    _write_labels(prefix + ".labels", inp.ids(), res.hard)
    _write_soft(prefix + ".beliefs.csv", inp.ids(), res.soft)
    summary = {"seed": seed, "accuracy": inp.accuracy(res.hard), **res.diagnostics}
    _finish(args, "bp", summary, prefix + ".manifest.json", rc.to_dict(), {"inputs": inp.digests()})


def cmd_bench(args) -> None:
    ov: dict = {}
    _set(ov, "bench", "sigma_grid", args.sigma)
    _set(ov, "bench", "replicates", args.replicates)
    _set(ov, "bench", "methods", args.methods)
    _set(ov, "bench", "n_range", args.n_range)
    _set(ov, "bench", "a_range", args.a_range)
    _set(ov, "bench", "b_range", args.b_range)
    _set(ov, "bench", "d", args.d)
    _set(ov, "bench", "kernel_samples", args.kernel_samples)
    rc, seed = _run_config(args, ov)
    from geonoise import plotting

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_benchmark(rc.bench, jobs=args.jobs)
    rows = summarize(records)
    tv = threshold_validation(records)
    write_records_csv(records, out / "records.csv")
    write_summary_csv(rows, out / "summary.csv")
    if args.timings:
        write_records_csv(records, out / "records_timed.csv", include_runtime=True)
    with open(out / "thresholds.csv", "w") as fh:
        cols = ["method", "sigma", "a", "b", "ca", "cb", "recoverable", "recovered", "match"]
        fh.write(",".join(cols) + "\n")
        for d in tv.dots:
            fh.write(",".join(repr(d[c]) if isinstance(d[c], float) else str(d[c]).lower() for c in cols) + "\n")
    plotting.plot_accuracy_curves(rows, out / "accuracy.png")
    plotting.plot_threshold_dots(tv.dots, out / "thresholds.png")
    summary = {
        "seed": seed, "runs": len(records), "failed": sum(bool(r.error) for r in records),
        "threshold_match": tv.match, "threshold_mismatch": tv.mismatch,
        "mean_accuracy": {f"{r.method}@{r.sigma}": r.mean_accuracy for r in rows},
    }
    _finish(args, "bench", summary, str(out / "manifest.json"), rc.to_dict(),
            {"files": ["records.csv", "summary.csv", "thresholds.csv", "accuracy.png", "thresholds.png"]})


def cmd_noise(args) -> None:
    rc, seed = _run_config(args, _geode_overrides(args), default_preset="noise")
    from geonoise import plotting

    inp = Inputs(args)
    coords, pdist, source = inp.coords, inp.pair_distance, "positions"
    if pdist is not None:
        source = "attributes"
    elif coords is None:
        coords, source = spectral_coordinates(inp.graph, args.coord_dim, seed), "spectral"
    result = run_geode(inp.graph, rc.geode, coords=coords, pair_distance=pdist, noise_samples=args.samples)
    n0 = geometric_noise_metric(inp.graph, coords, args.samples, seed, pair_distance=pdist)
    series = [(0, n0)] + result.trace.noise_series()
    slope = p = None
    if len(series) >= 3:
        slope, p = slope_significance(series)
    prefix = _prefix(args.out)
    result.trace.write_csv(prefix + ".trace.csv", include_runtime=args.timings)
    with open(prefix + ".noise.csv", "w") as fh:
        fh.write("t,noise\n")
        for t, v in series:
            fh.write(f"{t},{v!r}\n")
    plotting.plot_noise_trace(series, prefix + ".noise.png", slope, p)
    summary = {"seed": seed, "coords": source, "iterations": len(result.trace),
               "initial_noise": n0, "final_noise": series[-1][1], "slope": slope, "p_value": p}
    _finish(args, "noise", summary, prefix + ".manifest.json", rc.to_dict(), {"inputs": inp.digests()})


def cmd_thresholds(args) -> None:
    if args.c is not None:
        c = args.c
    else:
        seed = _resolve_seed(args)
        c = estimate_kernel_constant(args.d, args.sigma, args.samples, 0 if seed is None else seed)
    if not 0 < c <= 1:
        raise UsageError(f"c must lie in (0, 1], got {c}")
    if not (args.a > 0 and args.b > 0):
        raise UsageError("a and b must be positive")
    rep = recovery_thresholds(args.a, args.b, c)
    _finish(args, "thresholds", rep.as_dict(), None, {}, {})


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--preset", help="built-in parameter preset (synthetic, amazon, karate, noise)")
    common.add_argument("--seed", type=int, help="random seed (falls back to $GEODE_SEED)")
    common.add_argument("--json", action="store_true", help="print one JSON object instead of text")
    common.add_argument("--timings", action="store_true", help="also record wall-clock times")
    common.add_argument("-v", "--verbose", action="store_true")

    graph_in = argparse.ArgumentParser(add_help=False)
    graph_in.add_argument("--graph", required=True, help="edge list 'i j [w]'")
    graph_in.add_argument("--nodes", help="node sidecar 'id label x_1 ... x_d'")
    graph_in.add_argument("--attrs", help="attribute file 'id b_1 ... b_m' (node ids in --graph)")
    graph_in.add_argument("--labels", help="label file 'id label' (with --attrs)")

    p = Parser(prog="geonoise", description="Community recovery on geometrically noised block models.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    g = sub.add_parser("generate", parents=[common], help="sample a latent-kernel SBM")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--a", type=float, required=True)
    g.add_argument("--b", type=float, required=True)
    g.add_argument("--sigma", type=float, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--balanced", action="store_true")
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", parents=[common, graph_in], help="cluster a graph")
    c.add_argument("--method", choices=CLUSTER_METHODS, default="maso")
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--beta", type=float)
    c.add_argument("--clip-max", dest="clip_max", type=float)
    c.add_argument("--dim", type=int)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    def geode_flags(sp):
        sp.add_argument("--T", type=int)
        sp.add_argument("--B", type=int)
        sp.add_argument("--P", type=int)
        sp.add_argument("--decay-mode", dest="decay_mode", choices=("linear", "inverse_linear"))
        sp.add_argument("--spec-comm", dest="spec_comm")
        sp.add_argument("--spec-geom", dest="spec_geom")
        sp.add_argument("--beta", type=float)
        sp.add_argument("--clip-max", dest="clip_max", type=float)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--samples", type=int, default=2000, help="noise-metric pair sample size")
        sp.add_argument("--out", required=True)

    ge = sub.add_parser("geode", parents=[common, graph_in], help="iterative denoising")
    geode_flags(ge)
    ge.add_argument("--noise", action="store_true", help="record the noise metric (needs --nodes or --attrs)")
    ge.set_defaults(func=cmd_geode)

    b = sub.add_parser("bp", parents=[common, graph_in], help="weighted belief propagation")
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--beta-temp", dest="beta_temp", type=float)
    b.add_argument("--damping", type=float)
    b.add_argument("--max-iters", dest="max_iters", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bp)

    be = sub.add_parser("bench", parents=[common], help="synthetic sweep over sigma")
    be.add_argument("--out", required=True, help="output directory")
    be.add_argument("--sigma", type=float, nargs="+")
    be.add_argument("--replicates", type=int)
    be.add_argument("--methods", nargs="+")
    be.add_argument("--n-range", dest="n_range", type=int, nargs=2)
    be.add_argument("--a-range", dest="a_range", type=float, nargs=2)
    be.add_argument("--b-range", dest="b_range", type=float, nargs=2)
    be.add_argument("--d", type=int)
    be.add_argument("--kernel-samples", dest="kernel_samples", type=int)
    be.add_argument("--jobs", type=int, default=1)
    be.set_defaults(func=cmd_bench)

    no = sub.add_parser("noise", parents=[common, graph_in], help="noise-metric trace over a GeoDe run")
    geode_flags(no)
    no.add_argument("--coord-dim", dest="coord_dim", type=int, default=2)
    no.set_defaults(func=cmd_noise)

    t = sub.add_parser("thresholds", parents=[common], help="exact/weak recovery thresholds")
    t.add_argument("--a", type=float, required=True)
    t.add_argument("--b", type=float, required=True)
    grp = t.add_mutually_exclusive_group(required=True)
    grp.add_argument("--c", type=float, help="kernel constant")
    grp.add_argument("--sigma", type=float, help="estimate the kernel constant for this bandwidth")
    t.add_argument("--d", type=int, default=2)
    t.add_argument("--samples", type=int, default=1_000_000)
    t.set_defaults(func=cmd_thresholds)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    except Exception as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
