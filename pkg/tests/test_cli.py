"""End-to-end tests of the command-line interface on small grids."""

import csv
import json
import os

import pytest
import yaml

from bbq import io as bio
from bbq.cli import main
from bbq.runner import EXIT_BLOWUP, EXIT_CONFIG, EXIT_FAIL, EXIT_OK

CONFIG = {
    "grid": {"n": 32},
    "model": {"nu": 0.2, "lambda": 0.2},
    "stepper": {"dt": 0.01, "t_end": 0.2, "sample_every": 5},
    "init": {"shape": "random_band", "seed": 2,
             "target_grad_u_besov": 0.05, "target_grad_theta_besov": 0.005},
    "diagnostics": {"q_list": [2, "inf"], "s_list": [1]},
    "output": {"dir": "out", "snapshot_every": 1},
}


def write_config(tmp_path, name="run.yaml", **sections):
    data = json.loads(json.dumps(CONFIG))
    for section, body in sections.items():
        data[section] = {**data.get(section, {}), **body}
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.fixture
def run_dir(tmp_path):
    assert main(["run", write_config(tmp_path)]) == EXIT_OK
    return tmp_path / "out"


def test_run_writes_outputs(run_dir):
    for name in ("config.json", "timeseries.csv", "report.json", "perf.json"):
        assert (run_dir / name).is_file()
    header, rows = bio.read_csv(str(run_dir / "timeseries.csv"))
    assert len(rows) == round(0.2 / (0.01 * 5)) + 1
    assert rows[-1]["t"] == pytest.approx(0.2)
    assert "besov_grad_u_q2" in header and "hs_u_s1" in header
    report = json.loads((run_dir / "report.json").read_text())
    assert report["checks"]["run_completed"]["status"] == "pass"
    assert report["checks"]["theta_decay_l2"]["status"] == "pass"
    assert len(os.listdir(run_dir / "snapshots")) == len(rows)


def test_config_echo_is_canonical(run_dir):
    echo = json.loads((run_dir / "config.json").read_text())
    assert echo["grid"]["L"] == pytest.approx(6.283185307179586)
    assert echo["diagnostics"]["q_list"] == [2.0, "inf"]


def test_malformed_config_exits_3_without_outputs(tmp_path, capsys):
    path = write_config(tmp_path, model={"nu": "slow"})
    assert main(["run", path]) == EXIT_CONFIG
    assert "model.nu" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config_exits_3(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_blowup_exits_2_with_truncated_series(tmp_path):
    path = write_config(tmp_path, init={"shape": "taylor_green",
                                        "target_grad_u_besov": 50.0,
                                        "target_grad_theta_besov": 1.0},
                        stepper={"dt": 0.5, "t_end": 5.0, "sample_every": 1})
    assert main(["run", path]) == EXIT_BLOWUP
    _, rows = bio.read_csv(str(tmp_path / "out" / "timeseries.csv"))
    assert 1 <= len(rows) < 11
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["checks"]["run_completed"]["status"] == "fail"
    perf = json.loads((tmp_path / "out" / "perf.json").read_text())
    assert perf["blowup"]


def test_analyze_reproduces_report(run_dir):
    assert main(["analyze", str(run_dir)]) == EXIT_OK
    assert (run_dir / "analysis" / "report.json").read_bytes() == \
        (run_dir / "report.json").read_bytes()
    assert (run_dir / "analysis" / "timeseries.csv").read_bytes() == \
        (run_dir / "timeseries.csv").read_bytes()


def test_analyze_adds_q_columns(run_dir):
    assert main(["analyze", str(run_dir), "--q-list", "4"]) == EXIT_OK
    h0, rows0 = bio.read_csv(str(run_dir / "timeseries.csv"))
    h1, rows1 = bio.read_csv(str(run_dir / "analysis" / "timeseries.csv"))
    assert "besov_grad_u_q4" in h1 and "besov_grad_u_q4" not in h0
    for r0, r1 in zip(rows0, rows1):
        assert all(r1[k] == r0[k] for k in h0)
    assert all(r["besov_grad_u_q4"] > 0 for r in rows1)


def test_analyze_new_q_needs_snapshots(tmp_path):
    path = write_config(tmp_path, output={"dir": "out", "snapshot_every": 0})
    assert main(["run", path]) == EXIT_OK
    assert main(["analyze", str(tmp_path / "out"), "--q-list", "4"]) == EXIT_CONFIG


def test_analyze_truncated_csv_exits_3(run_dir, capsys):
    csv_path = run_dir / "timeseries.csv"
    text = csv_path.read_text()
    csv_path.write_text(text[: len(text) - 7])
    assert main(["analyze", str(run_dir)]) == EXIT_CONFIG
    assert "truncated" in capsys.readouterr().err


def test_analyze_missing_files_exits_3(tmp_path, run_dir):
    assert main(["analyze", str(tmp_path / "empty")]) == EXIT_CONFIG
    os.remove(run_dir / "config.json")
    assert main(["analyze", str(run_dir)]) == EXIT_CONFIG


def test_bad_q_list_argument_rejected(run_dir):
    with pytest.raises(SystemExit):
        main(["analyze", str(run_dir), "--q-list", "1"])


def _boundary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_single_value_sweep_matches_run(tmp_path, monkeypatch):
    monkeypatch.setenv("BBQ_THREADS", "1")
    assert main(["run", write_config(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    sweep = write_config(tmp_path, "sweep.yaml", output={"dir": "sw"},
                         sweep={"param": "nu", "values": [0.2]})
    assert main(["sweep", sweep]) == EXIT_OK
    rows = json.loads((tmp_path / "sw" / "sweep_report.json").read_text())["rows"]
    assert len(rows) == 1
    thr = report["checks"]["threshold_persistence"]
    assert rows[0]["status"] == thr["outcome"] == "never"
    assert rows[0]["max_frac_A0"] == thr["max_frac_A0"]
    assert rows[0]["A0"] == report["thresholds"]["A0"]


def test_amplitude_sweep_rows(tmp_path, monkeypatch):
    monkeypatch.setenv("BBQ_THREADS", "1")
    path = write_config(tmp_path, "sweep.yaml",
                        sweep={"param": "amplitude", "values": [0.5, 0.25, 0.1]})
    assert main(["sweep", path]) == EXIT_OK
    rows = _boundary(tmp_path / "out" / "boundary.csv")
    assert [int(r["index"]) for r in rows] == [0, 1, 2]
    assert [float(r["value"]) for r in rows] == [0.5, 0.25, 0.1]
    assert all(r["status"] == "never" for r in rows)
    assert all(float(r["max_frac_A0"]) < 1 for r in rows)
    assert sorted(os.listdir(tmp_path / "out" / "rows")) == \
        ["row_000.json", "row_001.json", "row_002.json"]


def test_sweep_requires_section(tmp_path):
    assert main(["sweep", write_config(tmp_path)]) == EXIT_CONFIG


def test_check_passes_and_is_deterministic(capsys):
    assert main(["check", "--seed", "3"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["check", "--seed", "3"]) == EXIT_OK
    assert capsys.readouterr().out == first
    assert first.count("PASS") == 9


def test_check_detects_injected_fault(capsys):
    assert main(["check", "--inject-fault", "partition"]) == EXIT_FAIL
    captured = capsys.readouterr()
    assert "FAIL partition_of_unity" in captured.out
    assert "first failure: partition_of_unity" in captured.err


def test_parallel_sweep_matches_sequential(tmp_path, monkeypatch):
    reports = []
    for threads in ("1", "2"):
        monkeypatch.setenv("BBQ_THREADS", threads)
        path = write_config(tmp_path, f"sweep{threads}.yaml", output={"dir": f"sw{threads}"},
                            sweep={"param": "lambda", "values": [0.4, 0.1]})
        assert main(["sweep", path]) == EXIT_OK
        reports.append(json.loads((tmp_path / f"sw{threads}" / "sweep_report.json").read_text()))
    assert reports[0]["rows"] == reports[1]["rows"]


def test_file_initial_data_from_snapshot(run_dir, tmp_path):
    snap = run_dir / "snapshots" / "sample_000000"
    path = write_config(tmp_path, "restart.yaml", output={"dir": "restart"},
                        init={"shape": "file", "path": str(snap)})
    assert main(["run", path]) == EXIT_OK
    _, a = bio.read_csv(str(run_dir / "timeseries.csv"))
    _, b = bio.read_csv(str(tmp_path / "restart" / "timeseries.csv"))
    # rescaled to the same targets, so the trajectories coincide
    assert b[-1]["l2_u"] == pytest.approx(a[-1]["l2_u"], rel=1e-10)
