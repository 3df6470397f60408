import csv
import io
import json

import pytest

from dipps.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_OK, main
from dipps.reports import TIMING_COLUMNS, summarize


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def _mask_timing(path):
    rows = _rows(path)
    for r in rows:
        for c in TIMING_COLUMNS:
            r.pop(c, None)
    return rows


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--out-dir", str(out), "--workers", "1"]) == EXIT_OK
    return out


def test_run_writes_reports(run_dir, capsys):
    for case in "ABC":
        assert (run_dir / f"schedule_{case}.csv").exists()
        doc = json.loads((run_dir / f"run_{case}.json").read_text())
        assert doc["schema"] == 1
        assert doc["case"] == case
        assert len(doc["soc_trajectory"]) == 25
        assert doc["timing"]["count"] == 24
    totals = _rows(run_dir / "totals.csv")
    assert [r["case"] for r in totals] == ["A", "B", "C"]
    assert list(totals[0]) == ["case", "P_S_G", "P_ES_G", "P_G_B", "total_cost"]
    assert len(_rows(run_dir / "schedule_A.csv")) == 24


def test_run_single_case(tmp_path):
    assert main(["run", "--case", "A", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert [r["case"] for r in _rows(tmp_path / "totals.csv")] == ["A"]
    assert not (tmp_path / "schedule_B.csv").exists()


def test_run_is_reproducible(run_dir, tmp_path):
    assert main(["run", "--out-dir", str(tmp_path), "--workers", "1"]) == EXIT_OK
    assert (tmp_path / "totals.csv").read_bytes() == (run_dir / "totals.csv").read_bytes()
    for case in "ABC":
        assert _mask_timing(tmp_path / f"schedule_{case}.csv") == _mask_timing(run_dir / f"schedule_{case}.csv")
        a = json.loads((tmp_path / f"run_{case}.json").read_text())
        b = json.loads((run_dir / f"run_{case}.json").read_text())
        a.pop("timing"), b.pop("timing")
        assert a == b


def test_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "load": {"values": [1, 2]},\n  "ess": {}\n}\n')
    code = main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err["error"] == "ConfigError"
    assert err["field"]
    assert err["field"] in capsys.readouterr().err


def test_infeasible_window_exit(tmp_path):
    code = main(["run", "--case", "A", "--np", "1", "--out-dir", str(tmp_path)])
    assert code == EXIT_INFEASIBLE
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["error"] == "WindowInfeasible"
    assert (err["n_p"], err["policy"], err["case"]) == (1, "EveryWindow", "A")
    assert 0 <= err["start"] < 24


def test_bench_guard(tmp_path):
    assert main(["bench", "--np", "9", "--out-dir", str(tmp_path)]) == EXIT_LIMIT
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "WindowTooLarge"


def test_bench_small_window(tmp_path, capsys):
    assert main(["bench", "--np", "2", "--case", "B", "--out-dir", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "bench_B.json").read_text())
    assert summary["windows"] == 24
    assert summary["max_objective_difference"] <= 1e-6
    assert len(_rows(tmp_path / "bench_B.csv")) == 24
    assert "speedup" in capsys.readouterr().out


def test_sweep_rows(tmp_path, capsys):
    assert main(["sweep", "--np-range", "1", "2", "--case", "A", "--case", "C", "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "sweep.csv")
    assert [(r["n_p"], r["case"], r["feasible"]) for r in rows] == [
        ("1", "A", "false"),
        ("2", "A", "true"),
        ("1", "C", "false"),
        ("2", "C", "true"),
    ]


def test_sweep_bad_range(tmp_path):
    assert main(["sweep", "--np-range", "5", "2", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_node_limit_exit(tmp_path):
    assert main(["run", "--case", "A", "--node-limit", "1", "--out-dir", str(tmp_path)]) == EXIT_LIMIT
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "NodeLimitExceeded"


def test_validate(capsys):
    assert main(["validate"]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("ok")


def test_unknown_case_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["run", "--case", "D"])
    assert info.value.code == 2


def test_sample_stddev():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.stddev == pytest.approx(1.2909944487358056)
    assert (s.count, s.mean, s.min, s.max) == (4, 2.5, 1.0, 4.0)
