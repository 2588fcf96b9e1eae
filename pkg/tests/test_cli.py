import json
import subprocess
import sys

import pytest

from geonoise.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sample(tmp_path, capsys):
    prefix = tmp_path / "g"
    code, _, _ = run(capsys, "generate", "--n", 100, "--a", 30, "--b", 5, "--sigma", 0.5, "--seed", 7, "--out", prefix)
    assert code == 0
    return prefix


def test_thresholds_example(capsys):
    code, out, _ = run(capsys, "thresholds", "--a", 9, "--b", 1, "--c", 1, "--json")
    doc = json.loads(out)
    assert code == 0 and doc["t_exact"] == 4.0 and doc["exact_recoverable"] is True
    code, out, _ = run(capsys, "thresholds", "--a", 9, "--b", 1, "--c", 1)
    assert "exact_recoverable: True" in out


def test_generate_twice_is_byte_identical(tmp_path, capsys):
    for name in ("x", "y"):
        run(capsys, "generate", "--n", 100, "--a", 30, "--b", 5, "--sigma", 0.5, "--seed", 7, "--out", tmp_path / name / "g")
    for ext in (".edges", ".nodes", ".manifest.json"):
        assert (tmp_path / "x" / f"g{ext}").read_bytes() == (tmp_path / "y" / f"g{ext}").read_bytes()


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GEODE_SEED", "7")
    run(capsys, "generate", "--n", 50, "--a", 30, "--b", 5, "--sigma", 0.5, "--out", tmp_path / "e")
    run(capsys, "generate", "--n", 50, "--a", 30, "--b", 5, "--sigma", 0.5, "--seed", 7, "--out", tmp_path / "f")
    assert (tmp_path / "e.edges").read_bytes() == (tmp_path / "f.edges").read_bytes()
    monkeypatch.setenv("GEODE_SEED", "seven")
    code, _, err = run(capsys, "generate", "--n", 50, "--a", 30, "--b", 5, "--sigma", 0.5, "--out", tmp_path / "g")
    assert code == 2 and json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_cluster_outputs(sample, capsys):
    out = sample.parent / "c"
    code, text, _ = run(capsys, "cluster", "--graph", f"{sample}.edges", "--nodes", f"{sample}.nodes",
                        "--method", "bethe_hessian", "--out", out, "--json")
    doc = json.loads(text)
    assert code == 0 and doc["accuracy"] >= 0.9
    assert len(open(f"{out}.labels").read().splitlines()) == 100
    assert open(f"{out}.soft.csv").readline().strip() == "node,q0,q1"
    man = json.load(open(f"{out}.manifest.json"))
    assert man["command"] == "cluster" and "graph" in man["inputs"]


def test_geode_and_bp_pipeline(sample, capsys):
    out = sample.parent / "d"
    code, text, _ = run(capsys, "geode", "--graph", f"{sample}.edges", "--nodes", f"{sample}.nodes",
                        "--T", 3, "--dim", 16, "--noise", "--out", out, "--json")
    assert code == 0 and json.loads(text)["iterations"] == 3
    header = open(f"{out}.trace.csv").readline()
    assert header.startswith("t,objective") and "seconds" not in header
    code, text, _ = run(capsys, "bp", "--graph", f"{out}.denoised.edges", "--nodes", f"{sample}.nodes",
                        "--out", sample.parent / "b", "--json")
    assert code == 0 and 0.5 <= json.loads(text)["accuracy"] <= 1.0


def test_noise_command(sample, capsys):
    out = sample.parent / "n"
    code, text, _ = run(capsys, "noise", "--graph", f"{sample}.edges", "--nodes", f"{sample}.nodes",
                        "--T", 6, "--dim", 16, "--samples", 300, "--out", out, "--json")
    doc = json.loads(text)
    assert code == 0 and doc["coords"] == "positions" and doc["slope"] is not None
    assert open(f"{out}.noise.csv").readline().strip() == "t,noise"
    assert open(f"{out}.noise.png", "rb").read(8) == b"\x89PNG\r\n\x1a\n"


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "bench"
    code, text, _ = run(capsys, "bench", "--out", out, "--sigma", 0.5, "--replicates", 1, "--n-range", 60, 80,
                        "--methods", "bethe_hessian", "--kernel-samples", 10000, "--json", "--timings")
    assert code == 0 and json.loads(text)["runs"] == 1
    for name in ("records.csv", "summary.csv", "thresholds.csv", "accuracy.png", "thresholds.png",
                 "manifest.json", "records_timed.csv"):
        assert (out / name).exists()


def test_attribute_inputs(tmp_path, capsys):
    (tmp_path / "a.attrs").write_text("1 1 0 0\n2 1 0 1\n3 0 1 1\n4 0 1 0\n5 1 1 0\n6 0 0 1\n")
    (tmp_path / "a.edges").write_text("1 2\n1 5\n2 5\n3 4\n3 6\n4 6\n2 3\n")
    (tmp_path / "a.labels").write_text("1 0\n2 0\n3 1\n4 1\n5 0\n6 1\n")
    args = ["--graph", tmp_path / "a.edges", "--attrs", tmp_path / "a.attrs", "--labels", tmp_path / "a.labels"]
    code, text, _ = run(capsys, "noise", *args, "--preset", "karate", "--T", 4, "--samples", 10,
                        "--out", tmp_path / "an", "--json")
    assert code == 0 and json.loads(text)["coords"] == "attributes"
    code, _, _ = run(capsys, "cluster", *args, "--method", "bp", "--out", tmp_path / "ac")
    assert code == 0
    assert open(tmp_path / "ac.labels").read().split()[0] == "1"


def test_usage_errors(tmp_path, capsys):
    code, _, err = run(capsys, "thresholds", "--a", 9, "--b", 1, "--c", 2)
    assert code == 2 and '"error": "usage"' in err
    with pytest.raises(SystemExit) as exc:
        main(["cluster", "--method", "louvain", "--graph", "x", "--out", "y"])
    assert exc.value.code == 2
    assert '"error": "usage"' in capsys.readouterr().err
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"geode": {"nope": 1}}')
    code, _, err = run(capsys, "generate", "--n", 10, "--a", 5, "--b", 1, "--sigma", 0.5,
                       "--config", cfg, "--out", tmp_path / "z")
    assert code == 2 and "nope" in err


def test_runtime_errors_exit_one(tmp_path, capsys):
    code, _, err = run(capsys, "cluster", "--graph", tmp_path / "missing.edges", "--out", tmp_path / "o")
    assert code == 1
    assert json.loads(err.strip())["error"] == "FileNotFoundError"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "geonoise.cli", "thresholds", "--a", "9", "--b", "1", "--c", "1", "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["t_exact"] == 4.0


@pytest.mark.slow
def test_denoised_bp_beats_raw_bp(tmp_path, capsys):
    raw, denoised = [], []
    for seed in range(20):
        g = tmp_path / f"g{seed}"
        run(capsys, "generate", "--n", 500, "--a", 60, "--b", 5, "--sigma", 0.1, "--seed", seed, "--out", g)
        nodes = ["--nodes", f"{g}.nodes", "--seed", seed, "--json"]
        run(capsys, "geode", "--graph", f"{g}.edges", *nodes, "--out", f"{g}d")
        _, out, _ = run(capsys, "bp", "--graph", f"{g}.edges", *nodes, "--out", f"{g}r")
        raw.append(json.loads(out)["accuracy"])
        _, out, _ = run(capsys, "bp", "--graph", f"{g}d.denoised.edges", *nodes, "--out", f"{g}b")
        denoised.append(json.loads(out)["accuracy"])
    assert sum(denoised) / 20 > sum(raw) / 20
