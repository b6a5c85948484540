"""Exit codes, output files, determinism, and per-config smoke runs."""

import subprocess
import sys

import numpy as np
import pytest

from fastbasin import GenerationField
from fastbasin.cli import run
from fastbasin.configs import config_path
from fastbasin.render import DEFAULT_PALETTE

from .oracles import read_ppm


def cli(*argv):
    return run([str(a) for a in argv])


# ---------------------------------------------------------------------------
# exit codes


def test_missing_config_exits_2_naming_the_path(capsys):
    assert cli("attractor", "--ifs", "missing.ifs") == 2
    assert "missing.ifs" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path):
    good = config_path("sierpinski")
    assert cli("attractor", "--ifs", good, "--nx", 100) == 2
    assert cli("attractor", "--ifs", good, "--nx", 32) == 2
    assert cli("attractor", "--ifs", good, "--nx", 8192) == 2
    assert cli("fastbasin", "--ifs", good, "--K", 300) == 2
    assert cli("fastbasin", "--ifs", good, "--threads", 0) == 2
    assert cli("fastbasin", "--ifs", good, "--window", 1, 0, 0, 1) == 2
    assert cli("continuation", "--ifs", good) == 2  # no --theta
    assert cli("continuation", "--ifs", good, "--theta", "1,9") == 2
    assert cli("continuation", "--ifs", good, "--theta", "one") == 2
    assert cli("nosuchcommand", "--ifs", good) == 2


def test_unparseable_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ifs"
    bad.write_text("space plane2\nmap affine2 1 2\n")
    assert cli("attractor", "--ifs", bad) == 2
    assert capsys.readouterr().err.startswith("fastbasin:")


def test_computation_error_exits_1(tmp_path, capsys):
    # parses fine, but the map does not contract on the window
    grow = tmp_path / "grow.ifs"
    grow.write_text(
        "space plane2\nwindow -1 -1 1 1\nmap affine2 2 0 0 2 0 0\n"
    )
    assert cli("attractor", "--ifs", grow) == 1
    assert "fastbasin:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# output files


def test_fastbasin_writes_loadable_raster_and_image(tmp_path, capsys):
    out = tmp_path / "gen.fbg"
    img = tmp_path / "gen.ppm"
    rc = cli(
        "fastbasin",
        "--ifs",
        config_path("sierpinski"),
        "--nx",
        128,
        "--K",
        3,
        "--window",
        -2,
        -2,
        2,
        2,
        "--out",
        out,
        "--png",
        img,
    )
    assert rc == 0
    field = GenerationField.load(str(out))
    assert field.grid.nx == 128
    counts = [int((field.gen == k).sum()) for k in range(4)]
    assert all(c > 0 for c in counts)
    stdout = capsys.readouterr().out
    assert "band_cells=" + ",".join(map(str, counts)) in stdout
    w, h, pixels = read_ppm(img.read_bytes())
    assert (w, h) == (128, 128)
    # each band appears in the image with its palette color
    for band in (DEFAULT_PALETTE.attractor, *DEFAULT_PALETTE.colors[:3]):
        assert (pixels == np.array(band, dtype=np.uint8)).all(axis=2).any()


def test_analyze_report_file_matches_stdout(tmp_path, capsys):
    report = tmp_path / "report.txt"
    rc = cli(
        "analyze",
        "--ifs",
        config_path("sierpinski"),
        "--nx",
        256,
        "--K",
        3,
        "--report",
        report,
    )
    assert rc == 0
    stdout = capsys.readouterr().out
    assert report.read_text() == stdout
    assert "dim_attractor=" in stdout


def test_escape_demo_prints_achievement(capsys):
    rc = cli(
        "escape-demo",
        "--ifs",
        config_path("sierpinski"),
        "--nx",
        128,
        "--n-target",
        2,
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "n_target=2" in out
    achieved = int(out.split("achieved=")[1].splitlines()[0])
    assert achieved >= 2


# ---------------------------------------------------------------------------
# every shipped config runs a pipeline


@pytest.mark.parametrize(
    "name,command",
    [
        ("sierpinski", "fastbasin"),
        ("ifs01", "fastbasin"),
        ("kigami", "fastbasin"),
        ("fig6", "fastbasin"),
        ("moebius1d", "fastbasin"),
        ("halfsqrt", "attractor"),
        ("parabola_c2", "analyze"),
    ],
)
def test_every_shipped_config_runs(name, command, tmp_path):
    args = [command, "--ifs", config_path(name), "--nx", 128, "--K", 3]
    if command == "fastbasin":
        args += ["--out", tmp_path / f"{name}.fbg"]
    assert cli(*args) == 0


# ---------------------------------------------------------------------------
# determinism


def run_subprocess(outdir, threads):
    out = outdir / f"t{threads}.fbg"
    img = outdir / f"t{threads}.ppm"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "fastbasin",
            "fastbasin",
            "--ifs",
            str(config_path("ifs01")),
            "--nx",
            "128",
            "--K",
            "4",
            "--window",
            "-6.2",
            "-6.2",
            "6.3",
            "6.3",
            "--out",
            str(out),
            "--png",
            str(img),
            "--threads",
            str(threads),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out.read_bytes(), img.read_bytes(), proc.stdout


def test_byte_identical_across_runs_and_thread_counts(tmp_path):
    a = run_subprocess(tmp_path, 1)
    b = run_subprocess(tmp_path, 4)
    assert a == b
