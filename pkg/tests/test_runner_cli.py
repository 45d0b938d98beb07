import csv
import json

import numpy as np
import pytest

from lcn_ot import runner
from lcn_ot.cli import main
from lcn_ot.errors import ConfigError
from lcn_ot.geometry import PointSet
from lcn_ot.metrics import CSV_FIELDS
from lcn_ot.pointio import write_points
from lcn_ot.runner import RunConfig, run


def small_cfg(**kw):
    base = dict(problem={"generator": "uniform-ball", "n": 40, "d": 4}, lam=0.2, budget={"total": 10}, seeds=[0, 1])
    base.update(kw)
    return RunConfig(**base)


def test_json_round_trip():
    cfg = small_cfg(bp={"enabled": True, "deletion_cost": float("inf")}, lsh={"scheme": "kmeans"}, tol=1e-7)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg


def test_config_validation():
    with pytest.raises(ConfigError):
        small_cfg(problem={"generator": "file", "n": 3}).validate()
    with pytest.raises(ConfigError):
        small_cfg(problem={"generator": "uniform-ball", "n": 5, "paths": ["a", "b"]}).validate()
    with pytest.raises(ConfigError):
        small_cfg(budget={"neighbors": 3}, variants=["lcn"]).validate()
    with pytest.raises(ConfigError):
        small_cfg(budget={"total": 4, "neighbors": 2}).validate()
    with pytest.raises(ConfigError):
        small_cfg(lsh={"colour": 1}).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"nope": 1}')


def test_one_by_one_file_problem(tmp_path):
    write_points(tmp_path / "p.txt", PointSet([[0.0, 0.0]]))
    write_points(tmp_path / "q.txt", PointSet([[3.0, 4.0]]))
    cfg = RunConfig(problem={"generator": "file", "paths": [str(tmp_path / "p.txt"), str(tmp_path / "q.txt")]},
                    variants=["full"], lam=1.0)
    (rec,) = run(cfg)
    assert rec.distance == pytest.approx(5.0)


def test_lcn_with_all_landmarks_matches_reference():
    cfg = small_cfg(problem={"generator": "uniform-ball", "n": 20, "d": 3}, variants=["lcn"],
                    budget={"neighbors": 2, "landmarks": 40}, seeds=[0])
    (rec,) = run(cfg)
    assert rec.pcc == pytest.approx(1.0, abs=1e-6)


def test_table1_style_sweep_csv(tmp_path):
    cfg = RunConfig(problem={"generator": "uniform-ball", "n": 500, "d": 16}, lam=0.05, budget={"total": 40},
                    seeds=[0, 1, 2, 3, 4], output=str(tmp_path / "t1"))
    recs = run(cfg)
    with open(tmp_path / "t1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(recs) == len(rows) == 20
    assert list(rows[0]) == CSV_FIELDS
    assert [r["variant"] for r in rows[:4]] == ["full", "sparse", "nystrom", "lcn"]
    payload = json.loads((tmp_path / "t1.json").read_text())
    assert RunConfig.from_dict(payload["config"]) == cfg


def test_strict_mode_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        run(small_cfg(strict=True, output=str(tmp_path / f"r{k}")))
        outs.append((tmp_path / f"r{k}.csv").read_bytes())
    assert outs[0] == outs[1]


def test_reference_skipped_above_threshold(monkeypatch):
    monkeypatch.setattr(runner, "REFERENCE_MAX_ENTRIES", 100)
    recs = run(small_cfg(seeds=[0]))
    assert all(r.pcc is None and r.csv_row()["pcc"] == "" for r in recs)


def test_failing_variant_is_isolated(monkeypatch):
    real = runner.build_operator

    def flaky(variant, *a, **kw):
        if str(getattr(variant, "value", variant)) == "nystrom":
            raise FloatingPointError("synthetic failure")
        return real(variant, *a, **kw)

    monkeypatch.setattr(runner, "build_operator", flaky)
    recs = run(small_cfg())
    failed = [r for r in recs if r.failed]
    assert {r.variant for r in failed} == {"nystrom"} and len(failed) == 2
    assert "seed=1" in failed[1].error
    assert main(["run", "--n", "30", "--d", "3", "--budget", "6"]) == 2


def test_thread_pool_preserves_order(monkeypatch):
    monkeypatch.setenv("LCN_OT_THREADS", "3")
    a = [(r.seed, r.variant, r.distance) for r in run(small_cfg(seeds=[2, 0, 1]))]
    monkeypatch.setenv("LCN_OT_THREADS", "1")
    b = [(r.seed, r.variant, r.distance) for r in run(small_cfg(seeds=[2, 0, 1]))]
    assert a == b and [s for s, _, _ in a[::4]] == [2, 0, 1]
    monkeypatch.setenv("LCN_OT_THREADS", "zero")
    with pytest.raises(ConfigError):
        run(small_cfg())


def test_heads_expand_lambda_schedule():
    recs = run(small_cfg(heads=2, variants=["full"], seeds=[0]))
    assert [r.lam for r in recs] == pytest.approx([0.2, 0.4])


def test_sweep_sizes():
    recs = runner.sweep(small_cfg(variants=["sparse"], seeds=[0]), [30, 60])
    assert [r.n for r in recs] == [30, 60]


# --- command line ----------------------------------------------------------

def test_cli_generate_and_run(tmp_path, capsys):
    p, q = tmp_path / "p.bin", tmp_path / "q.bin"
    assert main(["generate", "--generator", "clustered", "--n", "30", "--clusters", "3", "--center-distance", "5",
                 "--radius", "0.5", "--out-p", str(p), "--out-q", str(q), "--binary"]) == 0
    out = tmp_path / "res"
    assert main(["run", "--points", str(p), str(q), "--lambda", "0.5", "--budget", "8", "--output", str(out)]) == 0
    assert (tmp_path / "res.csv").exists() and (tmp_path / "res.json").exists()


def test_cli_config_file_with_overrides(tmp_path):
    cfg = small_cfg(variants=["full", "sparse"], seeds=[0])
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    out = tmp_path / "o"
    assert main(["run", "--config", str(path), "--lambda", "0.3", "--output", str(out), "--strict"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "o.csv")))
    assert {r["lambda"] for r in rows} == {"0.3"} and rows[0]["ms_ot"] == ""


@pytest.mark.parametrize("argv", [
    ["run", "--n", "10", "--lambda", "-1"],
    ["run", "--n", "10", "--generator", "uniform-ball", "--points", "a", "b"],
    ["run", "--n", "10", "--budget", "4", "--neighbors", "2"],
    ["run", "--generator", "clustered", "--n", "10"],
    ["run", "--unknown-flag"],
    ["generate", "--points", "a", "b", "--out-p", "/dev/null", "--out-q", "/dev/null"],
    ["theorem-check", "--scenario", "clustered", "--param", "bogus=1"],
])
def test_cli_config_errors_exit_one(argv):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == 1


def test_cli_sweep(tmp_path):
    assert main(["sweep", "--n", "10", "--sizes", "20", "40", "--variants", "full", "--output",
                 str(tmp_path / "s")]) == 0
    assert len(list(csv.DictReader(open(tmp_path / "s.csv")))) == 2


def test_cli_theorem_check(tmp_path, capsys):
    out = tmp_path / "tc.json"
    assert main(["theorem-check", "--scenario", "clustered", "--param", "n_per_cluster=10", "--output", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] and rep["scenario"] == "clustered"
    assert main(["theorem-check", "--scenario", "iteration-bound", "--param", "instances=4"]) == 0
