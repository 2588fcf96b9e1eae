"""JSON run configuration with built-in parameter presets.

A document has optional blocks ``geode``, ``maso``, ``bp`` and ``bench`` whose
keys are the fields of the matching config classes, plus an optional
``preset`` name.  Resolution order: class defaults, then the preset, then the
file, then command-line overrides.  Unknown keys are errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

from geonoise.baselines import BpConfig
from geonoise.bench import BenchConfig, MethodSettings
from geonoise.geode import GeoDeConfig
from geonoise.maso import MasoConfig


class ConfigError(ValueError):
    pass


PRESETS: dict[str, dict] = {
    "synthetic": {},
    "amazon": {
        "geode": {"T": 100, "anneal_steps": 20, "P": 10, "seed": 42},
        "maso": {"num_walks": 10},
    },
    "karate": {
        "geode": {"B": 6, "T": 100, "anneal_steps": 20, "P": 10, "tol": 1e-4, "seed": 42},
        "maso": {"dim": 1, "walk_len": 2},
    },
    # slowed-down schedule used for noise traces
    "noise": {
        "geode": {
            "B": 32, "T": 150, "anneal_steps": 18, "warmup_rounds": 6,
            "tau_C": 0.96, "tau_G": 0.96, "tau_C_plus": 0.995, "tau_G_plus": 0.995,
            "shrink_comm": 0.45, "shrink_geo": 0.49, "boost_comm": 0.25, "boost_geo": 0.20,
            "w_min": 0.05, "w_max": 4.0, "tol": 5e-6, "P": 20, "seed": 42,
        },
    },
}

_BLOCKS = {
    "geode": GeoDeConfig,
    "maso": MasoConfig,
    "bp": BpConfig,
    "bench": BenchConfig,
}
_NESTED = {"geode": {"maso"}, "bench": {"settings"}}
_TUPLES = {"sigma_grid", "n_range", "a_range", "b_range", "methods"}


def _allowed(block: str) -> set[str]:
    return {f.name for f in fields(_BLOCKS[block])} - _NESTED.get(block, set())


@dataclass(frozen=True)
class RunConfig:
    geode: GeoDeConfig
    maso: MasoConfig
    bp: BpConfig
    bench: BenchConfig
    preset: str = "synthetic"

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "geode": {k: v for k, v in self.geode.to_dict().items() if k != "maso"},
            "maso": {f.name: getattr(self.maso, f.name) for f in fields(MasoConfig)},
            "bp": {f.name: getattr(self.bp, f.name) for f in fields(BpConfig)},
            "bench": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in self.bench.to_dict().items() if k != "settings"},
        }


def validate_document(doc: dict) -> None:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    extra = set(doc) - set(_BLOCKS) - {"preset"}
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    if "preset" in doc and doc["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {doc['preset']!r}; choose from {sorted(PRESETS)}")
    for block in _BLOCKS:
        body = doc.get(block, {})
        if not isinstance(body, dict):
            raise ConfigError(f"block {block!r} must be an object")
        bad = set(body) - _allowed(block)
        if bad:
            raise ConfigError(f"unknown keys in {block!r}: {sorted(bad)}")


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validate_document(doc)
    return doc


def _merge(*layers: dict) -> dict:
    out: dict = {}
    for layer in layers:
        for block, body in layer.items():
            if block == "preset":
                continue
            out.setdefault(block, {}).update(body)
    return out


def resolve(doc: dict | None = None, overrides: dict | None = None, preset: str | None = None) -> RunConfig:
    """Build validated config objects from a document plus per-block overrides."""
    doc = doc or {}
    overrides = overrides or {}
    validate_document(doc)
    validate_document(overrides)
    name = preset or doc.get("preset") or "synthetic"
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    merged = _merge(PRESETS[name], doc, overrides)
    try:
        maso = MasoConfig(**merged.get("maso", {}))
        geode = GeoDeConfig(maso=maso, **merged.get("geode", {}))
        bp = BpConfig(**merged.get("bp", {}))
        bench_kw = {k: (tuple(v) if k in _TUPLES else v) for k, v in merged.get("bench", {}).items()}
        bench = BenchConfig(settings=MethodSettings(maso, geode, bp), **bench_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(geode, maso, bp, bench, name)


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    geode = replace(cfg.geode, seed=seed)
    bp = replace(cfg.bp, seed=seed)
    bench = replace(cfg.bench, seed=seed, settings=MethodSettings(cfg.maso, geode, bp))
    return replace(cfg, geode=geode, bp=bp, bench=bench)
