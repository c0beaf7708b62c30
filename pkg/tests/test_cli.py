from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from noncollapse_lab import cli
from noncollapse_lab import noncollapse as nc
from noncollapse_lab.geometry import parse_slice

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(tmp_path, *argv):
    return cli.main(["--output-dir", str(tmp_path), *argv])


@pytest.mark.parametrize(
    "name, expected",
    [
        ("reaper-alpha", cli.EXIT_PASS),
        ("cylinder-corollary", cli.EXIT_PASS),
        ("bad-radii", cli.EXIT_HYPOTHESIS),
        ("cylinder-corollary-weak", cli.EXIT_HYPOTHESIS),
        ("ellipse-broken-lambda", cli.EXIT_HYPOTHESIS),
        ("bad-check", cli.EXIT_CONFIG),
    ],
)
def test_scenario_exit_codes(tmp_path, name, expected):
    assert run(tmp_path, "run", str(SCENARIOS / f"{name}.ini")) == expected


def test_sphere_summary_contents(tmp_path, capsys):
    assert run(tmp_path, "run", str(SCENARIOS / "sphere-theorem.ini")) == cli.EXIT_PASS
    text = (tmp_path / "sphere-theorem" / "summary.txt").read_text()
    assert text == capsys.readouterr().out
    assert text.rstrip().endswith("exit status 0")
    for check in cli.CHECKS:
        assert f"[{check}] pass" in text
    lines = (tmp_path / "sphere-theorem" / "theorem_conclusion.csv").read_text().splitlines()
    assert lines[0] == ",".join(nc.ZSCAN_HEADER)
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 201
    assert all(float(r[1]) >= -1e-8 or r[1] == "inf" for r in rows)


def test_bad_radii_message(tmp_path, capsys):
    run(tmp_path, "run", str(SCENARIOS / "bad-radii.ini"))
    assert "radii relation" in capsys.readouterr().out


def test_reaper_alpha_table_decays(tmp_path):
    run(tmp_path, "run", str(SCENARIOS / "reaper-alpha.ini"))
    data = np.loadtxt(tmp_path / "reaper-alpha" / "alpha.csv", delimiter=",", skiprows=1)
    height, alpha = data[:, 1], data[:, 2]
    assert np.all(alpha <= 1.1 * (np.pi / 2) * np.exp(-height))
    # log-slope of the tail is close to -1
    tail = height > 2
    slope = np.polyfit(height[tail], np.log(alpha[tail]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)


@pytest.mark.parametrize("name", ["reaper-alpha", "cylinder-corollary"])
def test_reruns_are_byte_identical(tmp_path, name):
    assert run(tmp_path / "a", "run", str(SCENARIOS / f"{name}.ini")) == 0
    assert cli.main(["--threads", "3", "--output-dir", str(tmp_path / "b"), "run", str(SCENARIOS / f"{name}.ini")]) == 0
    a, b = tmp_path / "a" / name, tmp_path / "b" / name
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_violation_gives_exit_one(tmp_path, monkeypatch):
    real = nc.inscribed_alphas
    monkeypatch.setattr(nc, "inscribed_alphas", lambda *a, **k: 3.0 * real(*a, **k))
    assert run(tmp_path, "run", str(SCENARIOS / "reaper-alpha.ini")) == cli.EXIT_VIOLATION
    assert "[alpha] violation" in (tmp_path / "reaper-alpha" / "summary.txt").read_text()


def test_config_errors(tmp_path):
    assert run(tmp_path, "run", str(tmp_path / "missing.ini")) == cli.EXIT_CONFIG
    bad = tmp_path / "no-flow.ini"
    bad.write_text("[surface]\nmodel = sphere\n[noncollapse]\nlambda = auto\n[checks]\nchecks = lemma22\n")
    assert run(tmp_path, "run", str(bad)) == cli.EXIT_CONFIG
    bad.write_text("[surface]\nmodel = sphere\nR0 = x\n[noncollapse]\nlambda = 1\n[checks]\nchecks = alpha\n")
    assert run(tmp_path, "run", str(bad)) == cli.EXIT_CONFIG


def test_scenario_keys_are_case_sensitive(tmp_path):
    f = tmp_path / "s.ini"
    f.write_text("[surface]\nmodel = sphere\n[noncollapse]\nlambda = 1\nR = 5\nr = 1.5\nn = 1\n[checks]\nchecks = alpha\n")
    sc = cli.load_scenario(f)
    assert (sc.R, sc.r, sc.n) == (5.0, 1.5, 1)
    assert sc.flow is None and sc.checks == ("alpha",)


def test_models_list(capsys):
    assert cli.main(["models", "list"]) == 0
    out = capsys.readouterr().out
    for kind in ("sphere", "cylinder", "reaper", "bowl", "plane"):
        assert out.count(f"{kind}:") == 1


def test_slice_dump_round_trips(capsys, tmp_path):
    assert cli.main(["slice", "dump", "sphere:R0=1,n=2", "-0.125", "32"]) == 0
    sl = parse_slice(capsys.readouterr().out)
    assert len(sl) == 32 and sl.time == -0.125
    assert np.allclose(np.linalg.norm(sl.points, axis=1), np.sqrt(1.5), atol=1e-14)
    assert run(tmp_path, "slice", "dump", "cylinder:extent=2", "0", "40") == 0
    assert (tmp_path / "cylinder_t0_N40.txt").exists()
    assert cli.main(["slice", "dump", "torus", "0", "32"]) == cli.EXIT_CONFIG
    assert cli.main(["slice", "dump", "sphere", "0.5", "32"]) == cli.EXIT_CONFIG


def test_convergence_subcommand(tmp_path, capsys):
    assert run(tmp_path, "convergence", "curvature", "--resolutions", "64,128,256") == 0
    out = capsys.readouterr().out
    assert "slope" in out
    lines = (tmp_path / "convergence_curvature.csv").read_text().splitlines()
    assert lines[0] == "N,h,value,error" and len(lines) == 5
    with pytest.raises(SystemExit):
        cli.main(["convergence", "nonsense"])
