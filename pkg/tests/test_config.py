import json

import pytest

from geonoise.config import PRESETS, ConfigError, load_document, resolve, with_seed


def test_defaults_follow_synthetic_table():
    rc = resolve()
    g = rc.geode
    assert (g.B, g.T, g.anneal_steps, g.warmup_rounds, g.P, g.seed) == (32, 50, 6, 2, 7, 0)
    assert (g.tau_C, g.tau_C_plus, g.shrink_comm, g.shrink_geo, g.boost_comm, g.boost_geo) == (0.9, 0.97, 1.0, 0.8, 0.6, 0.4)
    assert (g.w_min, g.w_max, g.tol) == (0.05, 4.0, 1e-5)
    assert (rc.maso.beta, rc.maso.dim, rc.maso.walk_len, rc.maso.num_walks, rc.maso.window) == (0.3, 64, 40, 2, 5)


def test_presets_apply():
    karate = resolve(preset="karate")
    assert karate.geode.B == 6 and karate.maso.dim == 1 and karate.geode.tol == 1e-4
    amazon = resolve(preset="amazon")
    assert amazon.geode.T == 100 and amazon.maso.num_walks == 10 and amazon.geode.seed == 42
    noise = resolve(preset="noise")
    assert noise.geode.T == 150 and noise.geode.tau_C_plus == 0.995
    assert set(PRESETS) == {"synthetic", "amazon", "karate", "noise"}


def test_layering_order():
    doc = {"preset": "amazon", "geode": {"T": 12, "P": 3}, "maso": {"dim": 8}}
    rc = resolve(doc, {"geode": {"T": 5}})
    assert rc.geode.T == 5 and rc.geode.P == 3 and rc.geode.anneal_steps == 20
    assert rc.maso.dim == 8 and rc.geode.maso.dim == 8
    assert rc.bench.settings.geode == rc.geode
    assert resolve(doc, preset="karate").geode.B == 6


@pytest.mark.parametrize("doc", [
    {"geode": {"bogus": 1}},
    {"extra": {}},
    {"preset": "nope"},
    {"maso": []},
    {"geode": {"tau_C": 2.0}},
    {"bench": {"replicates": 0}},
    {"geode": {"maso": {}}},
])
def test_bad_documents(doc):
    with pytest.raises(ConfigError):
        resolve(doc)


def test_load_document(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"bench": {"sigma_grid": [0.5, 0.1]}}))
    rc = resolve(load_document(p))
    assert rc.bench.sigma_grid == (0.5, 0.1)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_document(p)


def test_with_seed_and_round_trip():
    rc = with_seed(resolve(), 9)
    assert rc.geode.seed == rc.bp.seed == rc.bench.seed == 9
    again = resolve({k: v for k, v in rc.to_dict().items()})
    assert again.to_dict() == rc.to_dict()
    json.dumps(rc.to_dict())
