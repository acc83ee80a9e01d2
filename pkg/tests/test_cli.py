import subprocess
import sys

import numpy as np
import pytest

import mprk22.experiments as ex
from mprk22.cli import build_parser, fmt, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.strip().splitlines()
    assert lines[0].startswith("# mprk22 ")
    return lines[1].split(","), [line.split(",") for line in lines[2:]]


@pytest.mark.parametrize("x, text", [(0.1, "0.1"), (1 / 3, "0.3333333333333333"), (3, "3"),
                                     (np.float64(1e-300), "1e-300"), (float("nan"), "nan")])
def test_fmt_round_trip(x, text):
    assert fmt(x) == text
    if x == x:
        assert float(fmt(x)) == x


def test_integrate_fig1a(capsys):
    code, out, _ = run(["integrate", "--alpha", "-0.5", "--dt", "1", "--steps", "20",
                        "--a", "20", "--b", "20", "--delta", "0.23"], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["step", "t", "y_1", "y_2", "mass"]
    assert len(rows) == 21
    mass = np.array([float(r[-1]) for r in rows])
    assert np.max(np.abs(mass - 1)) <= 1e-12
    assert rows[0][2:4] == ["0.73", "0.27"]


def test_integrate_zero_steps(capsys):
    code, out, _ = run(["integrate", "--alpha", "1", "--steps", "0", "--a", "1",
                        "--delta", "0.1"], capsys)
    assert code == 0
    _, rows = parse_csv(out)
    assert rows == [["0", "0.0", "0.6", "0.4", "1.0"]]


def test_integrate_matrix_file(tmp_path, capsys):
    path = tmp_path / "A.csv"
    path.write_text("-2,1,0\n1,-1,3\n1,0,-3\n")
    out_path = tmp_path / "traj.csv"
    code, _, _ = run(["integrate", "--alpha", "-1", "--dt", "0.5", "--steps", "4",
                      "--matrix", str(path), "--y0", "0.2,0.3,0.5", "--out", str(out_path)],
                     capsys)
    assert code == 0
    header, rows = parse_csv(out_path.read_text())
    assert header[-1] == "mass" and len(header) == 6 and len(rows) == 5
    assert all(abs(float(r[-1]) - 1) <= 1e-12 for r in rows)


def test_integrate_bad_matrix(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("-1,1,0\n1,-1,0\n")
    code, _, err = run(["integrate", "--alpha", "1", "--matrix", str(path), "--y0", "0.5,0.5"],
                       capsys)
    assert code == 2 and "non-square" in err


def test_integrate_unparsable_matrix_location(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("-1,1\n1,x\n")
    code, _, err = run(["integrate", "--alpha", "1", "--matrix", str(path), "--y0", "0.5,0.5"],
                       capsys)
    assert code == 2 and ":2:" in err


@pytest.mark.parametrize("argv", [
    ["integrate", "--alpha", "1", "--matrix", "m.csv", "--y0", "0.5,0.5", "--a", "1"],
    ["integrate", "--alpha", "1"],
    ["integrate", "--alpha", "1", "--a", "1", "--delta", "0.6"],
    ["integrate", "--alpha", "0", "--a", "1"],
])
def test_integrate_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_integrate_nonpositive_y0(tmp_path, capsys):
    path = tmp_path / "A.csv"
    path.write_text("-1,1\n1,-1\n")
    code, _, err = run(["integrate", "--alpha", "1", "--matrix", str(path), "--y0", "1,0"],
                       capsys)
    assert code == 2 and "positive" in err


def test_integrate_numeric_failure_exit_1(tmp_path, capsys):
    code, _, err = run(["integrate", "--alpha", "0.002", "--a", "200", "--delta", "0.49999",
                        "--steps", "3"], capsys)
    assert code == 1 and "step 0" in err


def test_missing_required_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["stability"])
    assert info.value.code == 2
    assert "--alpha" in capsys.readouterr().err


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["stability", "--alpha", "1", "--bogus", "3"])
    assert info.value.code == 2


@pytest.mark.parametrize("command", ["integrate", "scan-delta", "scan-alpha-delta", "stability",
                                     "convergence"])
def test_help_lists_flags(command, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
    assert "default" in text
    assert "[time]" in text or "[count]" in text or "dimensionless" in text


# stability -----------------------------------------------------------------------


def test_stability_query(capsys):
    code, out, _ = run(["stability", "--alpha", "1", "--z", "-2"], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["R", "|R|", "class", "z_star"]
    assert float(rows[0][0]) == pytest.approx(0.1111111111111111, abs=1e-16)
    assert rows[0][2:] == ["stable", ""]


def test_stability_dt_lambda(capsys):
    code, out, _ = run(["stability", "--alpha", "-0.25", "--dt", "1", "--lambda", "-10"], capsys)
    _, rows = parse_csv(out)
    assert code == 0 and rows[0][2] == "unstable"
    assert "--lambda -10.0" in out.splitlines()[0]


def test_stability_z_star(capsys):
    code, out, _ = run(["stability", "--alpha", "-0.25"], capsys)
    _, rows = parse_csv(out)
    assert code == 0
    assert float(rows[0][2]) == pytest.approx(-4.4232, abs=5e-5)
    code, out, _ = run(["stability", "--alpha", "2"], capsys)
    assert parse_csv(out)[1] == [["2.0", "nonnegative", ""]]


def test_stability_alpha_zero(capsys):
    code, _, err = run(["stability", "--alpha", "0", "--z", "-1"], capsys)
    assert code == 2 and "alpha=0" in err


def test_stability_sweep_flags_pole(capsys):
    code, out, _ = run(["stability", "--alpha", "1", "--zmin", "-1", "--zmax", "1", "--n", "3"],
                       capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["z", "R"]
    assert rows[1] == ["0.0", "1.0"] and rows[2] == ["1.0", "pole"]


def test_stability_sweep_undefined_positive_z(capsys):
    code, out, _ = run(["stability", "--alpha", "-1", "--zmin", "-1", "--zmax", "1", "--n", "2"],
                       capsys)
    assert code == 0 and parse_csv(out)[1][1] == ["1.0", "undefined"]


# scans -----------------------------------------------------------------------------


def test_scan_delta_fig2a(capsys):
    code, out, err = run(["scan-delta", "--alpha", "-0.5", "--a", "20", "--dt", "1",
                          "--steps", "10000", "--samples", "200"], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["delta", "d", "class"] and len(rows) == 200
    classes = [r[2] for r in rows]
    k = classes.index("unstable")
    assert classes[k - 1] == "stable"
    assert 0.23 <= float(rows[k - 1][0]) < float(rows[k][0]) <= 0.24
    assert "between delta=0.23125 and delta=0.23375" in err


def test_scan_delta_one_sample(capsys):
    assert run(["scan-delta", "--alpha", "-0.5", "--samples", "1"], capsys)[0] == 2


def test_scan_alpha_delta_zero_alpha(capsys):
    code, _, err = run(["scan-alpha-delta", "--alpha-min", "-1", "--alpha-max", "1",
                        "--alpha-samples", "4", "--delta-samples", "2", "--steps", "1"], capsys)
    assert code == 2 and "MPRK22 undefined at alpha=0" in err


def test_scan_alpha_delta_default_grid_shape(capsys, monkeypatch):
    # the default 241 x 160 grid, with the step count cut to keep the test quick
    code, out, _ = run(["scan-alpha-delta", "--steps", "1"], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["alpha", "delta", "d", "class"]
    assert len(rows) == 241 * 160
    alphas = sorted({float(r[0]) for r in rows})
    assert len(alphas) == 241 and 0.0 not in alphas and alphas[-1] == 2.0
    assert rows[0][0] == rows[159][0] != rows[160][0]


def test_scan_files_identical_across_threads(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(ex, "CHUNK", 16)
    outs = []
    for threads in ("1", "3"):
        path = tmp_path / f"scan{threads}.csv"
        argv = ["scan-alpha-delta", "--alpha-min", "-0.7", "--alpha-max", "-0.4",
                "--alpha-samples", "7", "--delta-samples", "12", "--steps", "300",
                "--threads", threads, "--out", str(path)]
        assert run(argv, capsys)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert b"--threads" not in outs[0]


def test_env_threads_override(monkeypatch, capsys):
    seen = []
    real = ex.scan_alpha_delta

    def spy(*args, **kwargs):
        seen.append(args[-1])
        return real(*args, **kwargs)

    monkeypatch.setattr(ex, "scan_alpha_delta", spy)
    monkeypatch.setenv("MPRK_THREADS", "5")
    run(["scan-delta", "--alpha", "1", "--samples", "2", "--steps", "2", "--threads", "2"],
        capsys)
    assert seen == [5]


# convergence -------------------------------------------------------------------------


@pytest.mark.parametrize("alpha", ["1", "-1"])
def test_convergence_defaults(alpha, capsys):
    code, out, _ = run(["convergence", "--alpha", alpha], capsys)
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["dt", "error", "order"]
    assert rows[0][2] == "" and len(rows) == 8
    assert 1.9 <= float(rows[-1][2]) <= 2.1


def test_convergence_short_list(capsys):
    assert run(["convergence", "--alpha", "1", "--dt-list", "0.1,0.05"], capsys)[0] == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mprk22", "stability", "--alpha", "1",
                           "--z", "-2"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[2].startswith("0.1111111111111111,")
