import csv
import json

import pytest
import yaml

from hocbf_tissf import cli, solvers
from hocbf_tissf.scenario import bundled_config, read_config


def _write(tmp_path, name="case1", **sim):
    doc = read_config(bundled_config(name))
    doc["simulation"].update(sim)
    p = tmp_path / f"{name}.yaml"
    p.write_text(yaml.safe_dump(doc))
    return p, doc


def test_simulate_writes_outputs(tmp_path):
    cfg, _ = _write(tmp_path, horizon=0.1)
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == cli.EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    manifest = json.loads((out / "manifest.json").read_text())
    assert metrics["diverged"] is False and metrics["steps"] == 100
    assert manifest["command"] == "simulate" and manifest["exit_code"] == 0
    assert (out / "trajectory.csv").read_text().startswith("t,x11,")


def test_missing_config(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == cli.EXIT_MISSING


def test_invalid_config(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("name: x\n")
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_divergence_exit_code(tmp_path):
    doc = read_config(bundled_config("case1"))
    doc["simulation"]["horizon"] = 2.0
    doc["tissf"]["form"] = "paper_reciprocal"
    p = tmp_path / "div.yaml"
    p.write_text(yaml.safe_dump(doc))
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", str(p), "--out", str(out)]) == cli.EXIT_DIVERGED
    assert json.loads((out / "metrics.json").read_text())["diverged"] is True
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == cli.EXIT_DIVERGED


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        cli.main(["verify-oracle", "--samples", "0", "--out", "x"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.main(["sweep", "--config", "case1", "--out", "x", "--param", "dt", "--grid", "1"])
    assert e.value.code == 2


def test_verify_oracle_small(tmp_path):
    assert cli.main(["verify-oracle", "--samples", "200", "--seed", "3", "--out", str(tmp_path)]) == cli.EXIT_OK
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert summary["passed"] is True
    rows = list(csv.reader(open(tmp_path / "mismatches.csv")))
    assert len(rows) == 1  # header only


def test_verify_oracle_negative_control(tmp_path, monkeypatch):
    real = solvers.minnorm_clf_cbf

    def broken(clf, cbf, rho):
        out = real(clf, cbf, rho)
        out.u = out.u * 1.001 + 1e-6
        return out

    monkeypatch.setattr(solvers, "minnorm_clf_cbf", broken)
    rc = cli.main(["verify-oracle", "--samples", "100", "--out", str(tmp_path)])
    assert rc == cli.EXIT_VERIFY
    rows = list(csv.DictReader(open(tmp_path / "mismatches.csv")))
    assert rows and all(r["family"] in ("minnorm", "tissf_minnorm") for r in rows)


def test_regions(tmp_path):
    assert cli.main(["regions", "--config", "case1", "--out", str(tmp_path), "--grid", "5"]) == cli.EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "regions.csv")))
    assert len(rows) == 25
    assert {"theta", "theta_dot", "region", "basis", "active_set"} <= set(rows[0])


def test_sweep_singleton_matches_simulate(tmp_path):
    cfg, doc = _write(tmp_path, horizon=0.1)
    sim_out, sweep_out = tmp_path / "sim", tmp_path / "sweep"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(sim_out)]) == 0
    value = str(doc["tissf"]["epsilon0"])
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(sweep_out),
                     "--param", "epsilon0", "--grid", value]) == 0
    a = (sim_out / "trajectory.csv").read_bytes()
    b = (sweep_out / "point_000" / "trajectory.csv").read_bytes()
    assert a == b
    rows = list(csv.DictReader(open(sweep_out / "sweep.csv")))
    assert len(rows) == 1 and rows[0]["status"] == "ok"
