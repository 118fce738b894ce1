import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from partition_lab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_fit_example_a(tmp_path):
    rc = main(["fit", "--algo", "kmeans", "--config", str(CONFIGS / "example_a.json"), "--out", str(tmp_path)])
    assert rc == 0
    assert {p.name for p in tmp_path.iterdir()} >= {"trace.csv", "result.json", "manifest.json"}
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["status"] == "converged"
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seeds"]["seed"] == 0 and "numpy" in m["versions"]


def test_fit_seed_override_deterministic(tmp_path):
    for d in ("a", "b"):
        main(["fit", "--config", str(CONFIGS / "example_a.json"), "--seed", "7", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    base = tmp_path / "c"
    main(["fit", "--config", str(CONFIGS / "example_a.json"), "--out", str(base)])
    assert (base / "trace.csv").read_bytes() != (tmp_path / "a" / "trace.csv").read_bytes()


def test_fit_max_iters_exit_2(tmp_path):
    cfg = json.loads((CONFIGS / "example_d.json").read_text())
    cfg["fit"] = {"max_iters": 2}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg, indent=2))
    assert main(["fit", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_missing_and_malformed_config(tmp_path, caplog):
    assert main(["fit", "--config", str(tmp_path / "nope.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "density": [\n    {"weight": 1.0, "mu": 0\n  ]\n}\n')
    assert main(["fit", "--config", str(bad)]) == 1
    assert "bad.json:4" in caplog.text
    bad.write_text('{\n  "algorithm": "kmeans",\n  "density": [{"weight": 0.4, "mu": 0, "sigma": 1}]\n}\n')
    assert main(["fit", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "bad.json:3" in caplog.text


def test_decompose_stdout_json(tmp_path, capsys):
    args = ["decompose", "--config", str(CONFIGS / "decompose_a_wta.json"), "--out", str(tmp_path)]
    assert main(args) == 0
    first = capsys.readouterr().out
    rep = json.loads(first)
    assert abs(rep["w"][0] - 0.5) < 1e-12 and abs(rep["h2_w0"] - 1) < 1e-12
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert main(["decompose", "--config", str(CONFIGS / "decompose_a_posterior.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert max(rep["kl"]) < 1e-6


def test_decompose_truncation_exit_3(tmp_path):
    cfg = json.loads((CONFIGS / "decompose_a_wta.json").read_text())
    cfg["grid"] = {"lo": -3, "hi": 3, "n_points": 1025}
    p = tmp_path / "t.json"
    p.write_text(json.dumps(cfg))
    assert main(["decompose", "--config", str(p), "--out", str(tmp_path)]) == 3


def test_experiment_figure8_and_unknown(tmp_path):
    assert main(["experiment", "figure8", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "figure8" / "curve.csv").exists() and (tmp_path / "manifest.json").exists()
    assert main(["experiment", "bogus", "--out", str(tmp_path)]) == 1


def test_out_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PARTITION_LAB_OUT", str(tmp_path))
    assert main(["experiment", "figure8"]) == 0
    assert (tmp_path / "figure8" / "plot.svg").exists()


def test_sweep_small(tmp_path):
    rc = main(["sweep", "--d", "1,3", "--algo", "em,kmeans", "--n-samples", "1000", "--out", str(tmp_path), "--jobs", "2"])
    assert rc == 0
    lines = (tmp_path / "figure7" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "d,v_true,v_em,v_kmeans" and len(lines) == 3
    assert main(["sweep", "--d", "x", "--out", str(tmp_path)]) == 1


@pytest.mark.slow
def test_console_script_experiment_all(tmp_path):
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "partition_lab.cli", "experiment", "all", "--out", str(tmp_path), "--jobs", "2"],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    assert r.stdout == ""
    for name in ("example_a", "example_b", "example_c", "example_d", "figure3", "figure7", "figure8"):
        assert (tmp_path / name).is_dir()
    assert (tmp_path / "figure7" / "em" / "trace.csv").exists()
