import csv
import io
import subprocess
import sys

import pytest

from stochtrack.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_track_example1_stochastic(capsys):
    code, out, err = _run(capsys, "track", "--problem", "example1", "--method", "stochastic", "--dt", "0.1", "--seed", "1")
    assert code == 0
    rows = _rows(out)
    assert rows[0][:2] == ["k", "p"] and rows[0][-3:] == ["residual_original", "m_used", "newton_iters"]
    body = rows[1:]
    assert len(body) == 12
    assert [r[0] for r in body[:11]] == [str(k) for k in range(11)]
    assert body[-1][0] == "reanchor"
    assert "status=Completed" in err and "steps=11" in err


def test_track_toy_traditional_reports_bifurcation(capsys):
    code, out, err = _run(capsys, "track", "--problem", "toy", "--method", "traditional", "--dp", "0.1")
    assert code == 0
    assert "status=BifurcationDetected" in err
    final_p = float(err.split("final_p=")[1].split()[0])
    assert abs(final_p) < 0.01


def test_unknown_problem_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["track", "--problem", "nosuch"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [
    ["track", "--problem", "toy", "--dp", "-0.1"],
    ["track", "--problem", "toy", "--branch", "5"],
    ["track", "--problem", "example1", "--dt", "0"],
])
def test_bad_arguments_exit_2(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_stochastic_toy_is_usage_error(capsys):
    code, _, err = _run(capsys, "track", "--problem", "toy")
    assert code == 2 and "n >= 2" in err


def test_out_file_and_summary(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    code, out, _ = _run(capsys, "track", "--problem", "example2", "--n", "10", "--seed", "3", "--out", str(path))
    assert code == 0
    assert out.startswith("status=Completed")
    data = path.read_bytes()
    assert b"\r" not in data
    rows = _rows(data.decode())
    assert len(rows[0]) == 2 + 9 + 3
    assert float(rows[1][1]) == 14.0


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("STOCHTRACK_SEED", "5")
    _, a, _ = _run(capsys, "track", "--problem", "example2", "--n", "10")
    _, b, _ = _run(capsys, "track", "--problem", "example2", "--n", "10", "--seed", "5")
    assert a == b
    monkeypatch.setenv("STOCHTRACK_SEED", "nope")
    code, _, _ = _run(capsys, "track", "--problem", "example2", "--n", "10")
    assert code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\ndelta_p = -2.0\nseed = 9\n")
    _, via_file, _ = _run(capsys, "track", "--problem", "example2", "--config", str(cfg))
    _, explicit, _ = _run(capsys, "track", "--problem", "example2", "--dp", "-2", "--seed", "9")
    assert via_file == explicit
    assert len(_rows(via_file)) == 1 + 7 + 1
    # command-line flags override the file
    _, override, _ = _run(capsys, "track", "--problem", "example2", "--config", str(cfg), "--dp", "-1")
    assert len(_rows(override)) == 1 + 13 + 1


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    code, _, err = _run(capsys, "track", "--problem", "example2", "--config", str(cfg))
    assert code == 2 and "bad.cfg:1" in err


def test_list_branches(capsys):
    code, out, _ = _run(capsys, "track", "--problem", "example2", "--n", "20", "--list-branches")
    assert code == 0
    lines = out.strip().splitlines()
    assert [ln.split("\t")[1] for ln in lines] == ["lower", "upper", "constant"]


def test_compare_example2(tmp_path, capsys):
    path = tmp_path / "cmp.csv"
    code, out, _ = _run(capsys, "compare", "--problem", "example2", "--n", "10,20,40,80", "--out", str(path))
    assert code == 0
    rows = _rows(path.read_text())
    assert len(rows) == 5
    assert [r[1] for r in rows[1:]] == ["10", "20", "40", "80"]
    assert all(r[8] == "Completed" for r in rows[1:])


def test_demo_curves(tmp_path, capsys):
    code, _, _ = _run(capsys, "verify", "--demo-fig1", "--sigma", "0.1", "--samples", "8", "--seed", "0",
                      "--out-dir", str(tmp_path))
    assert code == 0
    rows = _rows((tmp_path / "fig1_demo.csv").read_text())
    assert len(rows[0]) == 1 + 16
    assert len(rows) == 1 + 201


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stochtrack", "track", "--problem", "example1", "--seed", "2"],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0
    assert "status=Completed" in res.stderr
