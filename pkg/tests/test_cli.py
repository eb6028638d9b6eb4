import csv
import io
import json

import pytest

from cpr_lab import cli, experiments
from cpr_lab.cli import main, resolve_config

SMALL_RECOVER = ["recover", "--n", "32", "--k", "2", "--trials", "2", "--no-timestamp"]


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# ------------------------------------------------------------ exit codes
@pytest.mark.parametrize(
    "argv",
    [
        ["recover", "--trials", "0"],
        ["recover", "--format", "xml"],
        ["recover", "--out", "/nonexistent/dir/r.csv"],
        ["sweep-noise", "--a", "1.0"],
        ["recover", "--svg", "x.svg"],
        ["ripcheck", "--n", "4", "--k", "5"],
        ["bogus"],
    ],
)
def test_config_errors_exit_2(capsys, tmp_path, argv):
    argv = [a.replace("x.svg", str(tmp_path / "x.svg")) for a in argv]
    code, out, _ = _run(capsys, argv)
    assert code == 2
    assert out == ""


def test_unknown_config_key_and_bad_file(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n": 16, "colour": "red"}))
    assert _run(capsys, ["recover", "--config", str(p)])[0] == 2
    p.write_text("{not json")
    assert _run(capsys, ["recover", "--config", str(p)])[0] == 2
    assert _run(capsys, ["recover", "--config", str(tmp_path / "missing.json")])[0] == 2


def test_runtime_failure_exit_1(capsys, monkeypatch):
    def boom(cfg):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(cli.RUNNERS, "recover", boom)
    code, _, err = _run(capsys, SMALL_RECOVER)
    assert code == 1
    assert "solver exploded" in err


def test_lemmas_exit_status(capsys):
    args = ["lemmas", "--samples", "50000", "--trials", "30", "--seed", "1", "--no-timestamp", "--format", "json"]
    code, out, _ = _run(capsys, args)
    assert code == 0
    assert all(r["passed"] for r in json.loads(out))
    code, out, _ = _run(capsys, args + ["--break-tolerance"])
    assert code == 1
    assert not all(r["passed"] for r in json.loads(out))


# ------------------------------------------------------------ report format
def test_json_report_schema(capsys):
    code, out, _ = _run(capsys, SMALL_RECOVER + ["--format", "json", "--seed", "3"])
    assert code == 0
    rows = json.loads(out)
    assert isinstance(rows, list) and len(rows) == 2
    for r in rows:
        assert {"n", "k", "m", "trial", "success", "relative_error", "config"} <= set(r)
        assert r["config"]["seed"] == 3 and r["config"]["command"] == "recover"
        assert r["config"]["timestamp"] is False


def test_csv_header_and_float_round_trip(capsys):
    code, out, _ = _run(capsys, SMALL_RECOVER + ["--seed", "3"])
    assert code == 0
    first, rest = out.split("\n", 1)
    assert first.startswith("# config: ")
    meta = json.loads(first[len("# config: "):])
    assert meta["n"] == 32
    csv_rows = list(csv.DictReader(io.StringIO(rest)))
    code, out, _ = _run(capsys, SMALL_RECOVER + ["--seed", "3", "--format", "json"])
    json_rows = json.loads(out)
    for c, j in zip(csv_rows, json_rows):
        assert float(c["relative_error"]) == j["relative_error"]


def test_timestamp_present_by_default(capsys):
    code, out, _ = _run(capsys, SMALL_RECOVER[:-1] + ["--format", "json"])
    assert code == 0
    stamp = json.loads(out)[0]["config"]["timestamp"]
    assert isinstance(stamp, str) and stamp.endswith("+00:00")


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = _run(capsys, SMALL_RECOVER + ["--format", "json", "--out", str(path)])
    assert code == 0 and out == ""
    assert len(json.loads(path.read_text())) == 2


# ------------------------------------------------------------ config precedence
def test_flags_beat_config_beat_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n": 40, "trials": 7, "multiplier": "3:5"}))
    cfg, _ = resolve_config(["recover", "--config", str(p), "--trials", "2"])
    assert cfg.n == 40
    assert cfg.trials == 2
    assert cfg.multiplier == [3.0, 4.0, 5.0]
    assert cfg.k == cli.DEFAULTS["recover"]["k"]
    cfg, _ = resolve_config(["recover"])
    assert cfg.n == 128 and cfg.trials == 1


def test_range_syntax():
    assert cli._int_list("2:10:4") == [2, 6, 10]
    assert cli._float_list("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert cli._float_list("1, 2.5") == [1.0, 2.5]
    with pytest.raises(ValueError):
        cli._float_list("1:3:0")


# ------------------------------------------------------------ commands
def test_ripcheck_default_config_inside_band(capsys):
    code, out, _ = _run(capsys, ["ripcheck", "--samples", "2000", "--format", "json", "--no-timestamp"])
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 1
    assert rows[0]["n"] == 64 and rows[0]["k"] == 4
    assert rows[0]["inside_paper_band"] is True


def test_ripcheck_spread_tightens_over_m_grid(capsys):
    argv = ["ripcheck", "--n", "24", "--k", "3", "--m", "40,160,640", "--samples", "1500", "--format", "json"]
    code, out, _ = _run(capsys, argv)
    assert code == 0
    spreads = [r["upper_ratio"] - r["lower_ratio"] for r in json.loads(out)]
    assert spreads[0] > spreads[-1]


def test_sweep_svg(tmp_path, capsys):
    svg = tmp_path / "pt.svg"
    argv = ["sweep-pt", "--n", "24", "--k", "2", "--multiplier", "4,8", "--trials", "2", "--svg", str(svg)]
    code, _, _ = _run(capsys, argv)
    assert code == 0
    assert svg.read_text().lstrip().startswith("<?xml")


def test_sweep_noise_reports_bounds(capsys):
    argv = ["sweep-noise", "--n", "32", "--k", "2", "--trials", "2", "--epsilon", "0,0.1", "--format", "json"]
    code, out, _ = _run(capsys, argv)
    assert code == 0
    for r in json.loads(out):
        # at zero noise the bound is zero and only round-off remains
        assert r["max_dist_matrix"] <= r["matrix_bound"] + 1e-10


def test_worker_count_does_not_change_results(capsys, monkeypatch):
    monkeypatch.setattr(experiments.os, "cpu_count", lambda: 2)
    outs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("CPR_LAB_THREADS", threads)
        code, out, _ = _run(capsys, SMALL_RECOVER + ["--trials", "4", "--format", "json"])
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_bad_thread_env_is_config_error(capsys, monkeypatch):
    monkeypatch.setenv("CPR_LAB_THREADS", "lots")
    assert _run(capsys, SMALL_RECOVER)[0] == 2
