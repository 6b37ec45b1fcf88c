import csv
import json
import math
import os
import subprocess
import sys

import pytest

from dpim.cli import AUTO_BOUNDS_WARNING, main
from dpim.dfr import build_dfr
from dpim.event_log import EventLog
from dpim.miner import auto_bounds_unsafe
from synthetic import GROUND_TRUTH, synthetic_log

HYPER = ["--eps0", "0.01", "--gamma", "0.01", "--threshold", "0.95"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_mine_writes_tree(capsys, tmp_path, hospital_csv):
    out = tmp_path / "tree.json"
    code, stdout, _ = run(capsys, "mine", "--input", hospital_csv, "--eps", 3.75, *HYPER,
                          "--lb", 5, "--ub", 25, "--seed", 1, "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["text"] == stdout.strip()
    assert doc["noisy_fitness"] >= 0.95


def test_eps_zero_is_usage_error(capsys, hospital_csv, tmp_path):
    code, _, err = run(capsys, "mine", "--input", hospital_csv, "--eps", 0, "--lb", 5, "--ub", 25,
                       "--out", tmp_path / "t.json")
    assert code == 1 and "eps > 0" in err


def test_missing_bounds_is_usage_error(capsys, hospital_csv, tmp_path):
    code, _, err = run(capsys, "mine", "--input", hospital_csv, "--eps", 1, "--out", tmp_path / "t.json")
    assert code == 1 and "--lb" in err


def test_unknown_command_and_missing_file(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 1
    capsys.readouterr()
    code, _, err = run(capsys, "stats", "--input", tmp_path / "nope.csv")
    assert code == 1 and "no such file" in err


def test_seeded_runs_are_identical(capsys, tmp_path, hospital_csv):
    docs = []
    for i in range(2):
        tree, manifest = tmp_path / f"t{i}.json", tmp_path / f"m{i}.json"
        code, _, _ = run(capsys, "mine", "--input", hospital_csv, "--eps", 1.25, "--lb", 5, "--ub", 25,
                         "--seed", 7, "--out", tree, "--manifest", manifest)
        m = json.loads(manifest.read_text())
        m.pop("wall_time_s")
        docs.append((code, tree.read_bytes() if tree.exists() else None, m))
    assert docs[0] == docs[1]


def test_manifest_and_ledger(capsys, tmp_path, hospital_csv):
    ledger, manifest = tmp_path / "ledger.json", tmp_path / "manifest.json"
    code, _, err = run(capsys, "mine", "--input", hospital_csv, "--eps", 3.75, "--lb", 5, "--ub", 25,
                       "--seed", 3, "--out", tmp_path / "t.json", "--emit-ledger", ledger,
                       "--manifest", manifest, "--emit-pnml", tmp_path / "n.pnml",
                       "--emit-dot", tmp_path / "n.dot", "--evaluate")
    assert code == 0
    entries = json.loads(ledger.read_text())
    assert math.isclose(sum(e["amount"] for e in entries), 3.75, abs_tol=1e-9)
    m = json.loads(manifest.read_text())
    assert m["seed"] == 3 and m["config"]["eps"] == 3.75 and m["config"]["steps"] == 530
    assert m["outcome"]["accepted"] and set(m["metrics"]) == {"fitness", "precision", "simplicity",
                                                               "generalization"}
    assert "not private" in err
    assert (tmp_path / "n.pnml").read_text().startswith("<?xml")
    assert (tmp_path / "n.dot").read_text().startswith("digraph")


def test_bottom_when_threshold_unreachable(capsys, tmp_path, monkeypatch):
    import dpim.miner as miner
    monkeypatch.setattr(miner.SensitiveLog, "fitness", lambda self, tree: -10.0)
    log = tmp_path / "l.csv"
    log.write_text(EventLog((("a", "b"),) * 10).to_csv())
    code, _, err = run(capsys, "mine", "--input", log, "--eps", 1e5, "--lb", 1, "--ub", 3,
                       "--seed", 0, "--out", tmp_path / "t.json")
    assert code == 2 and "Bottom" in err and not (tmp_path / "t.json").exists()


def test_auto_bounds_warns(capsys, tmp_path, hospital_csv):
    code, _, err = run(capsys, "mine", "--input", hospital_csv, "--eps", 3.75, "--auto-bounds-UNSAFE",
                       "--seed", 2, "--out", tmp_path / "t.json")
    assert code in (0, 2) and AUTO_BOUNDS_WARNING in err


def test_config_file(capsys, tmp_path, hospital_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps": 3.75, "lb": 5, "ub": 25, "seed": 4}))
    code, _, _ = run(capsys, "mine", "--input", hospital_csv, "--config", cfg,
                     "--out", tmp_path / "t.json", "--manifest", tmp_path / "m.json")
    assert code in (0, 2)
    assert json.loads((tmp_path / "m.json").read_text())["config"]["ub"] == 25


def test_stats(capsys, hospital_csv, tmp_path):
    code, out, _ = run(capsys, "stats", "--input", hospital_csv)
    assert code == 0 and json.loads(out) == {"traces": 100, "variants": 3, "events": 388, "activities": 5}
    empty = tmp_path / "empty.csv"
    empty.write_text("case,activity,order\n")
    code, out, _ = run(capsys, "stats", "--input", empty)
    assert json.loads(out) == {"traces": 0, "variants": 0, "events": 0, "activities": 0}


def test_compare_schema(capsys, tmp_path, hospital_csv):
    report = tmp_path / "r.csv"
    code, _, _ = run(capsys, "compare", "--input", hospital_csv, "--eps-list", "0.125", "--runs", 1,
                     "--lb", 5, "--ub", 25, "--seed", 5, "--out", report)
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert [r["method"] for r in rows] == ["im", "dpim"]
    if rows[1]["accepted"] == "True":
        assert 0.0 <= float(rows[1]["fitness"]) <= 1.0


def test_compare_parity_on_synthetic_logs(capsys, tmp_path):
    for i, truth in enumerate(GROUND_TRUTH):
        log = synthetic_log(truth, 500, seed=i)
        path = tmp_path / f"s{i}.csv"
        path.write_text(log.to_csv())
        lb = int((build_dfr(log).counts > 0).sum())
        ub = max(auto_bounds_unsafe(log)[1], lb)
        report = tmp_path / f"r{i}.csv"
        code, _, _ = run(capsys, "compare", "--input", path, "--eps-list", "100000", "--runs", 1,
                         "--lb", lb, "--ub", ub, "--seed", i, "--out", report)
        assert code == 0
        im, dp = list(csv.DictReader(report.open()))
        assert dp["accepted"] == "True"
        for metric in ("fitness", "precision", "simplicity", "generalization"):
            assert abs(float(im[metric]) - float(dp[metric])) <= 0.10, (truth, metric)


def test_module_entry_point(hospital_csv):
    res = subprocess.run([sys.executable, "-m", "dpim", "stats", "--input", str(hospital_csv)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["events"] == 388


def test_seed_note_outside_tests(hospital_csv, tmp_path):
    env = {k: v for k, v in os.environ.items() if k != "PYTEST_CURRENT_TEST"}
    res = subprocess.run([sys.executable, "-m", "dpim", "mine", "--input", str(hospital_csv), "--eps", "3.75",
                          "--lb", "5", "--ub", "25", "--seed", "1", "--out", str(tmp_path / "t.json")],
                         capture_output=True, text=True, env=env)
    assert "NOT private" in res.stderr
