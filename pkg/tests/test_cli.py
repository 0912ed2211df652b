import json
from pathlib import Path

import pytest

from hypolab import cli, experiments

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_empty_config_reports_mode(tmp_path, capsys):
    code = cli.main(["validate", write(tmp_path, {})])
    err = capsys.readouterr().err
    assert code == 1
    assert "mode: required" in err


def test_field_level_diagnostics(tmp_path, capsys):
    cfg = {"mode": "decay", "model.Nx": 2, "model.kind": "spline", "time.end": "long",
           "bogus.key": 1}
    code = cli.main(["run", write(tmp_path, cfg)])
    err = capsys.readouterr().err
    assert code == 1
    for key in ("model.Nx", "model.kind", "time.end", "bogus.key"):
        assert f"config error: {key}:" in err


def test_missing_file(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == 1


@pytest.mark.parametrize("path", CONFIGS, ids=[p.stem for p in CONFIGS])
def test_shipped_configs_validate(path, capsys):
    assert cli.main(["validate", str(path)]) == 0


def test_run_writes_record_and_honours_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYPOLAB_OUT", str(tmp_path / "out"))
    cfg = {"mode": "certify", "certify.M": 1.0, "certify.kappa": 1.0, "certify.grid": 21}
    code = cli.main(["run", write(tmp_path, cfg, "rate.json")])
    assert code == 0
    run = tmp_path / "out" / "rate"
    rec = json.loads((run / "run_record.json").read_text())
    assert rec["headline"]["lambda_bar"] >= 0.025
    assert rec["version"] and rec["wall_clock_s"] >= 0
    for name in rec["files"]:
        assert (run / name).stat().st_size > 0
    assert "optimizer_trace.csv" in (run / "plot.gp").read_text()


def test_runs_are_byte_identical(tmp_path):
    cfg = cli.validate({"mode": "tensor", "tensor.count": 5, "seed": 11})
    a = cli.execute(cfg, tmp_path / "a")
    b = cli.execute(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "tensor.csv").read_bytes() == (tmp_path / "b" / "tensor.csv").read_bytes()
    assert a["headline"] == b["headline"]


def test_certificate_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYPOLAB_OUT", str(tmp_path))
    cfg = {"mode": "certify", "certify.grid": 11, "ladder.a": 0.5, "ladder.b": 0.4, "ladder.c": 0.5}
    assert cli.main(["run", write(tmp_path, cfg)]) == 2
    rec = json.loads((tmp_path / "cfg" / "run_record.json").read_text())
    assert rec["status"] == "certificate-failure"


def test_sweep_certify_M_monotone(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYPOLAB_OUT", str(tmp_path))
    cfg = {"mode": "certify", "certify.grid": 11, "workers": 2, "sweep.certify.M": [2, 0, 1, 0.5]}
    assert cli.main(["sweep", write(tmp_path, cfg, "sw.json")]) == 0
    lines = (tmp_path / "sw" / "aggregate.csv").read_text().splitlines()
    head = lines[0].split(",")
    rows = [dict(zip(head, line.split(","))) for line in lines[1:]]
    assert [float(r["certify.M"]) for r in rows] == [0, 0.5, 1, 2]
    lam = [float(r["lambda_bar"]) for r in rows]
    assert all(x >= y for x, y in zip(lam, lam[1:]))


def test_single_point_sweep_equals_run(tmp_path):
    raw = {"mode": "tensor", "tensor.count": 4, "workers": 1, "sweep.seed": [5]}
    rows, agg, code = cli.run_sweep(raw, tmp_path / "s")
    single = cli.execute(cli.validate({"mode": "tensor", "tensor.count": 4, "seed": 5}), tmp_path / "r")
    assert code == 0
    assert (tmp_path / "s" / "run_0000" / "tensor.csv").read_bytes() == \
        (tmp_path / "r" / "tensor.csv").read_bytes()
    assert rows[0]["violations"] == single["headline"]["violations"]


def test_sweep_records_child_failure_and_continues(tmp_path, monkeypatch):
    real = experiments.PIPELINES["tensor"]

    def flaky(cfg, out):
        if cfg["seed"] == 2:
            raise cli.HypolabError("invalid-parameter", "injected")
        return real(cfg, out)

    monkeypatch.setitem(experiments.PIPELINES, "tensor", flaky)
    raw = {"mode": "tensor", "tensor.count": 2, "workers": 1, "sweep.seed": [1, 2, 3]}
    rows, agg, code = cli.run_sweep(raw, tmp_path)
    assert code == 1
    assert [r["exit_code"] for r in rows] == [0, 1, 0]
    assert "injected" in rows[1]["error"]


def test_oseen_sweep_appends_fit(tmp_path):
    raw = {"mode": "oseen", "oseen.N": 64, "workers": 1, "sweep.oseen.alpha": [10, 31.6, 100]}
    rows, agg, code = cli.run_sweep(raw, tmp_path)
    last = agg.read_text().splitlines()[-1].split(",")
    assert last[0] == "loglog_exponent" and float(last[1]) > 0


def test_sweep_validation(tmp_path, capsys):
    cfg = {"mode": "certify", "sweep.certify.Q": [1]}
    assert cli.main(["sweep", write(tmp_path, cfg)]) == 1
    cfg = {"mode": "certify", "sweep.certify.M": [1, -1]}
    assert cli.main(["sweep", write(tmp_path, cfg)]) == 1
    assert "certify.M" in capsys.readouterr().err
    cfg = {"mode": "certify", "sweep.certify.M": [1]}
    assert cli.main(["run", write(tmp_path, cfg)]) == 1
