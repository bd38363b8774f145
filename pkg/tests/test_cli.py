import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from parabifurc import cli
from parabifurc.cli import (EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, make_config, parse_number,
                            parse_range, reference_page, run)
from parabifurc.io import read_pgm

ROOT = Path(__file__).resolve().parents[1]


def run_capture(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cycle_example(capsys):
    code, out, _ = run_capture(capsys, "cycle", "--family", "quad", "--param", "c=-0.5", "--period", "1",
                               "--seed", "-0.3")
    assert code == EXIT_OK
    rep = json.loads(out)
    kappa = complex(*rep["cycle"]["multiplier"])
    assert abs(kappa - (1 - math.sqrt(3))) < 1e-12


def test_transversality_pitchfork_example(capsys):
    code, out, _ = run_capture(capsys, "transversality", "--family", "sine-mult", "--pitchfork")
    assert code == EXIT_OK
    rep = json.loads(out)["report"]
    assert rep["verdict"] == "DegenerateWithinTol"
    assert max(abs(complex(*q)) for q in rep["Q_at_points"]) < 1e-9


def test_diagram_example(tmp_path):
    out = tmp_path / "fig.csv"
    pgm = tmp_path / "fig.pgm"
    code = run(["diagram", "--family", "sine-mult", "--t", "-10:10", "--seed", "pi/2", "--grid-n", "201",
                "--out", str(out), "--pgm", str(pgm), "--height", "50"])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x" and len(lines) == 1 + 201 * 100
    assert read_pgm(pgm).shape == (50, 201)


def test_exit_codes(capsys, tmp_path):
    assert run_capture(capsys, "cycle", "--family", "nope")[0] == EXIT_DOMAIN
    assert run_capture(capsys, "cycle", "--bogus")[0] == EXIT_USAGE
    assert run_capture(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run_capture(capsys, "scan", "--grid-n", "1", "--t", "0:1")[0] == EXIT_DOMAIN
    assert run_capture(capsys, "cycle", "--newton-tol", "0")[0] == EXIT_DOMAIN
    assert run_capture(capsys, "scan")[0] == EXIT_DOMAIN  # --t missing
    # Newton cannot converge on a cycle of z^2 + 1 from a real seed
    code, _, err = run_capture(capsys, "cycle", "--family", "quad", "--param", "c=1", "--seed", "0.3")
    assert code == EXIT_NUMERICAL and "cycle" in err and "c" in err
    assert run_capture(capsys, "--help")[0] == 0


def test_subprocess_exit_code():
    proc = subprocess.run([sys.executable, "-m", "parabifurc.cli", "cycle", "--bad-flag"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE and "usage error" in proc.stderr


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fixed point of z^2 - 1/2\nfamily = quad\nparam.c = -0.5\nseed = 0.9\n")
    code, out, _ = run_capture(capsys, "cycle", "--config", str(cfg))
    assert code == EXIT_OK
    assert abs(complex(*json.loads(out)["cycle"]["points"][0]) - (1 + math.sqrt(3)) / 2) < 1e-12
    code, out, _ = run_capture(capsys, "cycle", "--config", str(cfg), "--seed", "-0.3")
    assert abs(complex(*json.loads(out)["cycle"]["points"][0]) - (1 - math.sqrt(3)) / 2) < 1e-12
    bad = tmp_path / "bad.cfg"
    bad.write_text("famly = quad\n")
    assert run_capture(capsys, "cycle", "--config", str(bad))[0] == EXIT_USAGE


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert make_config(["scan", "--t", "3:4"]).threads == 3
    assert make_config(["scan", "--t", "3:4", "--threads", "2"]).threads == 2
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    with pytest.raises(cli.UsageError):
        make_config(["scan", "--t", "3:4"])


@pytest.mark.parametrize("argv", [
    ["scan", "--family", "logistic", "--t", "2.8:4", "--grid-n", "60"],
    ["windows", "--family", "logistic", "--t", "2.8:3.5", "--grid-n", "40", "--n-samples", "10"],
    ["events", "--family", "logistic", "--t", "2.8:3.5", "--grid-n", "40"],
    ["diagram", "--family", "logistic", "--t", "2.8:4", "--grid-n", "50"],
    ["motion", "--family", "quad", "--param", "c=-0.5", "--N", "20"],
])
def test_identical_configs_give_identical_bytes(argv, tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(argv + ["--out", str(a)]) == EXIT_OK
    if argv[0] in ("scan", "diagram"):
        monkeypatch.setenv(cli.THREADS_ENV, "4")
    assert run(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_other_commands_run(capsys, tmp_path):
    assert run_capture(capsys, "petals", "--family", "quad", "--param", "c=0.25", "--seed", "0.5",
                       "--locate", "1")[0] == EXIT_OK
    code, out, _ = run_capture(capsys, "drho", "--family", "quad", "--param", "c=0.25")
    assert code == EXIT_OK and json.loads(out)["report"]["flag"] == "Positive"
    code, out, _ = run_capture(capsys, "continue", "--family", "logistic", "--w", "3.2", "--period", "2",
                               "--seed", "0.5,0.8", "--t-end", "4")
    assert code == EXIT_OK and out.splitlines()[-1].startswith("4,")
    code, out, _ = run_capture(capsys, "validate", "--family", "sine-mult")
    assert code == EXIT_OK and json.loads(out)["ok"] is True


def test_number_and_range_parsing():
    assert parse_number("pi/2") == pytest.approx(math.pi / 2)
    assert parse_number("1+sqrt(8)") == pytest.approx(1 + math.sqrt(8))
    assert parse_number("0.1-0.2j") == 0.1 - 0.2j
    assert parse_range("-10:10") == (-10.0, 10.0)
    with pytest.raises(cli.UsageError):
        parse_number("__import__('os')")
    with pytest.raises(cli.UsageError):
        parse_range("3")


def test_reference_page_is_current():
    assert (ROOT / "docs" / "CLI.md").read_text(encoding="utf-8") == reference_page()
    for name in cli.COMMANDS:
        assert f"## {name}" in reference_page()
