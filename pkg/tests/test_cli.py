from __future__ import annotations

import json
import subprocess
import sys

from forge.cli import DEFAULT_SEED, config_hash, main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_compile_tree_reports_delay(capsys, tmp_path):
    path = tmp_path / "tree.json"
    code, _, _ = run(["compile", "--protocol", "tree", "--params", '{"N": 4}', "--out", str(path)],
                     capsys)
    assert code == 0
    d = json.loads(path.read_text())
    assert d["collisions_ok"] is True
    assert [str(x) for x in d["delays"]] == ["17"]
    assert run(["verify", "--schedule", str(path), "--seeds", "5"], capsys)[0] == 0
    d["delays"] = ["18"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert run(["verify", "--schedule", str(bad), "--seeds", "5"], capsys)[0] == 1


def test_usage_errors(capsys, tmp_path):
    assert run(["bogus"], capsys)[0] == 2
    assert run(["verify", "--schedule", str(tmp_path / "missing.json")], capsys)[0] == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"L": [6, 7], "p": [0.01]}))
    code, _, err = run(["threshold", "--config", str(cfg)], capsys)
    assert code == 2
    assert "/L/1" in err
    cfg.write_text("{not json")
    assert run(["threshold", "--config", str(cfg)], capsys)[0] == 2
    cfg.write_text(json.dumps({"L": [6], "p": [0.01], "typo": 1}))
    assert run(["threshold", "--config", str(cfg)], capsys)[0] == 2


def test_threshold_outputs_identical_across_workers(capsys, tmp_path, monkeypatch):
    monkeypatch.delenv("FORGE_SEED", raising=False)
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"L": [4, 6], "p": [0.005], "samples": 200, "chunk": 50}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["threshold", "--config", str(cfg), "--out", str(a), "--workers", "1"], capsys)[0] == 0
    assert run(["threshold", "--config", str(cfg), "--out", str(b), "--workers", "2"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("# config_hash: ")
    assert lines[1] == f"# seed: {DEFAULT_SEED}"
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["seed"] == DEFAULT_SEED and meta["config_hash"] == lines[0].split(": ")[1]
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})


def test_seed_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"L": [4], "p": [0.005], "samples": 20, "seed": 3}))
    out = tmp_path / "o.csv"
    run(["threshold", "--config", str(cfg), "--out", str(out), "--workers", "1"], capsys)
    assert "# seed: 3" in out.read_text()
    run(["threshold", "--config", str(cfg), "--out", str(out), "--workers", "1", "--seed", "5"], capsys)
    assert "# seed: 5" in out.read_text()
    monkeypatch.setenv("FORGE_SEED", "11")
    run(["threshold", "--config", str(cfg), "--out", str(out), "--workers", "1", "--seed", "5"], capsys)
    assert "# seed: 11" in out.read_text()
    monkeypatch.setenv("FORGE_SEED", "x")
    assert run(["threshold", "--config", str(cfg), "--workers", "1"], capsys)[0] == 2


def test_checkpointed_threshold_resumes(capsys, tmp_path, monkeypatch):
    monkeypatch.delenv("FORGE_SEED", raising=False)
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"L": [4], "p": [0.004, 0.008], "samples": 100}))
    ck = tmp_path / "ck.jsonl"
    first = tmp_path / "1.csv"
    second = tmp_path / "2.csv"
    run(["threshold", "--config", str(cfg), "--out", str(first), "--checkpoint", str(ck),
         "--workers", "1"], capsys)
    run(["threshold", "--config", str(cfg), "--out", str(second), "--checkpoint", str(ck),
         "--workers", "1"], capsys)
    assert first.read_bytes() == second.read_bytes()
    assert len(ck.read_text().splitlines()) == 2


def test_collapse_and_phase_boundary(capsys, tmp_path):
    import numpy as np
    from forge.montecarlo import RatePoint, to_csv
    pts = []
    for L in (6, 8, 10):
        for p in np.linspace(0.003, 0.008, 11):
            x = (p - 0.005) * L
            y = 0.35 + 0.3 * np.tanh(x / 0.02)
            pts.append(RatePoint(L, float(p), 0.0, 10 ** 6, int(round(y * 10 ** 6))))
    data = tmp_path / "d.csv"
    data.write_text(to_csv(pts))
    out = tmp_path / "fit.json"
    assert run(["collapse", "--in", str(data), "--out", str(out)], capsys)[0] == 0
    fit = json.loads(out.read_text())
    assert abs(fit["p_th"] - 0.005) < 2e-4
    code, text, _ = run(["phase-boundary", "--points", "0:0.0053,0.1:0.003,0.2:0.001"], capsys)
    assert code == 0
    assert abs(json.loads(text)["beta"] - 0.0053) < 3e-4
    assert run(["phase-boundary"], capsys)[0] == 2


def test_percolate_and_optimal_l(capsys):
    code, text, _ = run(["percolate", "--lattice", "square2d", "--sizes", "8,16", "--samples", "200",
                         "--p", "0.4,0.5,0.6"], capsys)
    assert code == 0
    res = json.loads(text)
    assert res["coordination"] == 4 and len(res["curves"]["R"]["8"]) == 3
    code, text, _ = run(["optimal-l", "--eta", "1e-3", "--p", "1e-3", "--alpha", "-0.02",
                         "--beta", "0.0053"], capsys)
    assert code == 0 and abs(json.loads(text)["L_opt"] - 9.964) < 1e-3
    assert run(["optimal-l", "--eta", "1e-3", "--p", "0.01", "--alpha", "-0.02"], capsys)[0] == 1


def test_reproduce_fig10(capsys, tmp_path):
    assert run(["reproduce", "fig10", "--out", str(tmp_path / "f10")], capsys)[0] == 0
    man = json.loads((tmp_path / "f10" / "manifest.json").read_text())
    assert set(man["files"]) == {"curves.csv", "optimal.csv"}


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "forge.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "threshold" in r.stdout
