"""Command-line front end: configs in, rasters, images, and reports out.

Every pipeline is deterministic: identical argument vectors (including
--seed) produce byte-identical output files.  ``--threads`` caps worker
parallelism; the shipped pipelines are vectorized single-process code,
so the cap never changes results and exists as an interface guarantee.

Exit codes: 0 success, 1 computation failure (for example a
non-contractive system), 2 configuration or usage errors.
"""

import argparse
import sys
from typing import List, Optional, Sequence

import numpy as np

from .analysis import analyze, escape_time_demo
from .attractor import compute_attractor, grid_for
from .basin import (
    UNSET,
    GenerationField,
    basin_estimate,
    continuation,
    fast_basin_inverse,
    slow_basin,
)
from .errors import ConfigError, FastbasinError
from .ifs import IfsSystem, Space, Window, load_ifs
from .raster import CellRaster
from .render import DEFAULT_PALETTE, colorize, write_ppm

_COMMANDS = (
    "attractor",
    "fastbasin",
    "continuation",
    "slowbasin",
    "basin",
    "analyze",
    "escape-demo",
)


class _UsageError(Exception):
    """A problem with the invocation itself; maps to exit code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastbasin",
        description=(
            "attractors, fast basins, continuations, slow basins, and "
            "basin estimates of iterated function systems"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--ifs", required=True, help="system config file")
        p.add_argument("--nx", type=int, default=512)
        p.add_argument("--K", type=int, default=4)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--r", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--window",
            type=float,
            nargs=4,
            default=None,
            metavar=("XMIN", "YMIN", "XMAX", "YMAX"),
        )
        p.add_argument("--out", default=None, help="raster output path")
        p.add_argument(
            "--png", default=None, help="image output path (binary PPM)"
        )
        p.add_argument("--report", default=None, help="report output path")
        p.add_argument(
            "--theta",
            default=None,
            help="comma-separated word indices, e.g. 1,2,1",
        )
        p.add_argument(
            "--n-target",
            type=int,
            default=1,
            help="escape-demo: required stay time",
        )
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="worker cap; never affects output bytes",
        )
    return parser


def _validate(args: argparse.Namespace) -> None:
    nx = args.nx
    if nx < 64 or nx > 4096 or nx & (nx - 1):
        raise _UsageError(
            f"--nx must be a power of two in [64, 4096], got {nx}"
        )
    if not 0 <= args.K <= 254:
        raise _UsageError(f"--K must lie in [0, 254], got {args.K}")
    if args.threads < 1:
        raise _UsageError(f"--threads must be positive, got {args.threads}")
    if args.window is not None:
        xmin, ymin, xmax, ymax = args.window
        if not (xmin < xmax and (ymin < ymax or ymin == ymax == 0.0)):
            raise _UsageError(
                "--window must satisfy xmin < xmax and ymin < ymax "
                "(or ymin = ymax = 0 on the line)"
            )


def _parse_theta(text: Optional[str], ifs: IfsSystem) -> tuple:
    if text is None:
        raise _UsageError("continuation needs --theta, e.g. --theta 1,2,1")
    try:
        word = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise _UsageError(f"--theta must be comma-separated integers: {text!r}")
    if not word:
        raise _UsageError("--theta names no indices")
    for idx in word:
        if not 1 <= idx <= ifs.n_maps:
            raise _UsageError(
                f"--theta index {idx} outside 1..{ifs.n_maps}"
            )
    return word


def _window(args: argparse.Namespace) -> Optional[Window]:
    if args.window is None:
        return None
    return Window(*args.window)


def _cell_size(ifs: IfsSystem, args: argparse.Namespace) -> float:
    win = _window(args) or ifs.window
    if win is None:
        raise _UsageError(
            f"system {ifs.name!r} declares no window; pass --window"
        )
    return grid_for(ifs, Window(*win), args.nx).h


def _mask_field(raster: CellRaster) -> GenerationField:
    """Wrap a plain raster as a one-band field so it can be colorized."""
    gen = np.full(raster.grid.shape, UNSET, dtype=np.uint8)
    gen[raster.occ] = 0
    return GenerationField(raster.grid, gen, 0, 0.0)


def _write_image(field: GenerationField, path: str) -> None:
    write_ppm(colorize(field, DEFAULT_PALETTE), path)


def _emit(line: str) -> None:
    sys.stdout.write(line + "\n")


def _run_command(args: argparse.Namespace) -> None:
    ifs = load_ifs(args.ifs)
    window = _window(args)

    if args.command == "attractor":
        A = compute_attractor(ifs, window=window, nx=args.nx)
        if args.out:
            A.raster.save(args.out)
        if args.png:
            _write_image(_mask_field(A.raster), args.png)
        _emit(f"attractor {ifs.name}: cells={A.raster.count}")
        _emit(f"self_consistency={A.self_consistency:.9g}")
        return

    if args.command == "analyze":
        report = analyze(ifs, nx=args.nx, K=args.K, seed=args.seed)
        text = report.to_text()
        if args.report:
            with open(args.report, "w", encoding="ascii") as f:
                f.write(text)
        sys.stdout.write(text)
        return

    if args.command == "escape-demo":
        if ifs.space is Space.CPLANE2:
            from .attractor import chaos_game

            A = chaos_game(ifs, 20_000, seed=args.seed)
        else:
            A = compute_attractor(ifs, nx=args.nx)
        res = escape_time_demo(ifs, A, n_target=args.n_target)
        _emit(f"n_target={res.n_target}")
        _emit(f"achieved={res.achieved}")
        _emit(f"delta={res.delta:.9g}")
        _emit(f"margin={res.margin:.9g}")
        _emit(f"theta1={res.theta1}")
        return

    # the remaining pipelines transform a computed attractor
    A = compute_attractor(ifs, nx=args.nx)

    if args.command == "fastbasin":
        field = fast_basin_inverse(ifs, A, window=window, nx=args.nx, K=args.K)
        if args.out:
            field.save(args.out)
        if args.png:
            _write_image(field, args.png)
        counts = [int((field.gen == k).sum()) for k in range(args.K + 1)]
        _emit(f"fastbasin {ifs.name}: band_cells=" + ",".join(map(str, counts)))
        return

    if args.command == "continuation":
        word = _parse_theta(args.theta, ifs)
        cont = continuation(ifs, word, A, window=window, nx=args.nx)
        gen = np.full(cont.grid.shape, UNSET, dtype=np.uint8)
        # first stage that reaches a cell = position along the word
        for k in range(len(cont.stages) - 1, -1, -1):
            gen[cont.stages[k].occ] = k
        field = GenerationField(cont.grid, gen, len(word), 0.0)
        if args.out:
            field.save(args.out)
        if args.png:
            _write_image(field, args.png)
        _emit(
            f"continuation {ifs.name}: word={','.join(map(str, word))} "
            f"final_cells={cont.final().count}"
        )
        return

    if args.command == "slowbasin":
        r = args.r if args.r is not None else 4.0 * _cell_size(ifs, args)
        raster = slow_basin(ifs, A, r, window=window, nx=args.nx, K=args.K)
        if args.out:
            raster.save(args.out)
        if args.png:
            _write_image(_mask_field(raster), args.png)
        _emit(f"slowbasin {ifs.name}: r={r:.9g} cells={raster.count}")
        return

    if args.command == "basin":
        eps = args.eps if args.eps is not None else _cell_size(ifs, args)
        raster = basin_estimate(
            ifs, A, window=window, nx=args.nx, K=args.K, eps=eps
        )
        if args.out:
            raster.save(args.out)
        if args.png:
            _write_image(_mask_field(raster), args.png)
        _emit(f"basin {ifs.name}: eps={eps:.9g} cells={raster.count}")
        return

    raise _UsageError(f"unknown command {args.command!r}")


def run(argv: Sequence[str]) -> int:
    """Execute one invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _validate(args)
        _run_command(args)
    except _UsageError as e:
        sys.stderr.write(f"fastbasin: {e}\n")
        return 2
    except ConfigError as e:
        sys.stderr.write(f"fastbasin: {e}\n")
        return 2
    except FileNotFoundError as e:
        name = e.filename if e.filename else e
        sys.stderr.write(f"fastbasin: cannot read {name}\n")
        return 2
    except FastbasinError as e:
        sys.stderr.write(f"fastbasin: {e}\n")
        return 1
    except OSError as e:
        sys.stderr.write(f"fastbasin: {e}\n")
        return 1
    return 0


def entry() -> None:
    sys.exit(run(sys.argv[1:]))
