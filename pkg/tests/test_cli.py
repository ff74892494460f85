"""CLI end-to-end: subcommands, exit codes, bundles, determinism."""

import json

import pytest

from latticewave.cli import main

SEARCH_DOC = {
    "lattice": {"d": 2, "n": 7},
    "marks": [{"vertex": [3, 3], "lambda": 1.0}],
    "scenario": {"kind": "search", "steps": 12},
    "output": {"heatmap_every": 6},
}


def write_scenario(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_run_search_bundle(tmp_path, capsys):
    scenario = write_scenario(tmp_path, SEARCH_DOC)
    out_dir = tmp_path / "out"
    assert main(["run", scenario, "--out", str(out_dir)]) == 0
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "series.csv").exists()
    assert (out_dir / "spectral.json").exists()
    assert (out_dir / "heatmaps" / "step_000012.csv").exists()
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["threads"] == 1


def test_run_determinism(tmp_path):
    scenario = write_scenario(tmp_path, SEARCH_DOC)
    blobs = []
    for tag in ("a", "b"):
        out_dir = tmp_path / tag
        assert main(["run", scenario, "--out", str(out_dir)]) == 0
        blobs.append((out_dir / "series.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_env_out_override(tmp_path, monkeypatch):
    scenario = write_scenario(tmp_path, SEARCH_DOC)
    env_dir = tmp_path / "env-out"
    monkeypatch.setenv("LATTICEWAVE_OUT", str(env_dir))
    assert main(["run", scenario, "--out", str(tmp_path / "flag-out")]) == 0
    assert (env_dir / "manifest.json").exists()
    assert not (tmp_path / "flag-out").exists()


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = dict(SEARCH_DOC, marks=[{"vertex": [9, 0]}])
    scenario = write_scenario(tmp_path, bad)
    assert main(["run", scenario, "--out", str(tmp_path / "out")]) == 2
    assert "out of range" in capsys.readouterr().err


def test_failed_run_leaves_manifest(tmp_path, capsys):
    # transfer with a single mark parses but cannot run
    doc = {
        "lattice": {"d": 2, "n": 7},
        "marks": [{"vertex": [3, 3]}],
        "scenario": {"kind": "transfer", "steps": 5},
    }
    scenario = write_scenario(tmp_path, doc)
    out_dir = tmp_path / "out"
    assert main(["run", scenario, "--out", str(out_dir)]) == 1
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert "two marked" in manifest["error"]
    assert "error" in capsys.readouterr().err


def test_strict_flag(tmp_path, capsys):
    doc = dict(SEARCH_DOC)
    doc["output"] = dict(doc["output"], surprise=1)
    scenario = write_scenario(tmp_path, doc)
    assert main(["run", scenario, "--out", str(tmp_path / "o"), "--strict"]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_spectrum_tables(tmp_path):
    out_dir = tmp_path / "spec"
    assert main([
        "spectrum", "--d", "2", "--n", "5", "--target", "2,2",
        "--lambda-sweep", "0.9:1.1:0.1", "--out", str(out_dir),
    ]) == 0
    bloch = (out_dir / "bloch_table.csv").read_text().strip().split("\n")
    assert bloch[0] == "kappa_0,kappa_1,branch,theta"
    assert len(bloch) == 1 + 2 * 25
    sweep = (out_dir / "lambda_sweep.csv").read_text().strip().split("\n")
    assert sweep[0] == "lambda,eigenphase"
    assert len(sweep) > 1


def test_spectrum_cap(tmp_path, capsys):
    assert main([
        "spectrum", "--d", "2", "--n", "31", "--lambda-sweep", "0.9:1.1:0.1",
        "--dense-cap", "100", "--out", str(tmp_path / "o"),
    ]) == 1
    assert "dense-cap" in capsys.readouterr().err


def test_sweep_size_table(tmp_path):
    out_dir = tmp_path / "sw"
    assert main(["sweep", "--kind", "n", "--d", "2", "--n-list", "5,7",
                 "--out", str(out_dir)]) == 0
    rows = (out_dir / "size_sweep.csv").read_text().strip().split("\n")
    assert rows[0] == "n,N,overlap_sv,epsilon,delta,T0,T_s"
    assert len(rows) == 3


def test_sweep_lambda_table(tmp_path):
    out_dir = tmp_path / "swl"
    assert main([
        "sweep", "--kind", "lambda", "--d", "2", "--n", "7",
        "--sender", "0,0", "--receiver", "3,3",
        "--lambdas", "0.9:1.1:0.1", "--out", str(out_dir),
    ]) == 0
    rows = (out_dir / "switch_probe.csv").read_text().strip().split("\n")
    assert rows[0] == "lambda,fidelity"
    assert len(rows) == 4
