"""Certified outer approximations of IFS attractors on windowed grids.

The deterministic algorithm iterates the set map S -> cover(union of map
images of S), clipped to the window, starting from the full window.  The
sequence of occupied sets is monotone decreasing, so it stabilizes exactly;
the stable set is a cover of the attractor whenever the attractor lies in
the window.  A chaos-game sampler and an exact digit-recursion membership
test for the corner-subdivision gasket provide independent cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import (
    DidNotStabilizeError,
    NotContractiveError,
    UnsupportedSpaceError,
)
from .ifs import (
    IfsSystem,
    Point,
    Space,
    Window,
    apply,
    fixed_point,
    forward_lipschitz,
)
from .raster import CellRaster, Grid, hausdorff_distance, transport

__all__ = [
    "AttractorApprox",
    "grid_for",
    "hutchinson",
    "compute_attractor",
    "chaos_game",
    "gasket_member",
]


@dataclass(frozen=True)
class AttractorApprox:
    """Stabilized outer raster cover of an attractor."""

    raster: CellRaster
    ifs_name: str
    iterations: int
    self_consistency: float  # Hausdorff distance to the Hutchinson image

    @property
    def grid(self) -> Grid:
        return self.raster.grid


def grid_for(ifs: IfsSystem, window: Window, nx: int) -> Grid:
    """The raster grid a system uses over a window: one row on the line,
    square cells in the plane or the strip."""
    if ifs.space is Space.LINE1EXT:
        return Grid.line(window.xmin, window.xmax, nx)
    if ifs.space is Space.CPLANE2:
        raise UnsupportedSpaceError("cplane2 systems have no planar raster grid")
    return Grid.square(window, nx)


def hutchinson(ifs: IfsSystem, src: CellRaster, dst: Grid | None = None) -> CellRaster:
    """Outer cover of the union of forward map images of the occupied set."""
    dst = dst or src.grid
    out = CellRaster.empty(dst)
    for m in ifs.maps:
        out.occ |= transport(m, src, dst).occ
    return out


def _resolve_window(ifs: IfsSystem, window: Window | None) -> Window:
    win = window or ifs.window
    if win is None:
        raise ValueError(f"system {ifs.name!r} declares no window and none was given")
    return Window(*win)


def _check_contractive(ifs: IfsSystem, window: Window) -> None:
    for i, m in enumerate(ifs.maps, start=1):
        lip = forward_lipschitz(m, window)
        if not lip < 1.0:
            raise NotContractiveError(
                f"map {i} of {ifs.name!r} has forward Lipschitz bound "
                f"{lip:.6g} >= 1 on the window"
            )


def compute_attractor(
    ifs: IfsSystem,
    window: Window | None = None,
    nx: int = 512,
    max_iters: int = 4096,
    oversample: int = 1,
) -> AttractorApprox:
    """Iterate the covered Hutchinson operator from the full window to its
    exact fixpoint.

    The window must contain the attractor; all maps must be contractive on
    it (HalfSqrt systems satisfy this on their strip automatically).  With
    ``oversample`` > 1 the fixpoint is computed on a grid that much finer
    and then coarsened, tightening the cover at the same output resolution.
    """
    win = _resolve_window(ifs, window)
    _check_contractive(ifs, win)
    grid = grid_for(ifs, win, nx)
    work = grid if oversample <= 1 else grid_for(ifs, win, nx * oversample)

    current = CellRaster.full(work)
    iters = 0
    for iters in range(1, max_iters + 1):
        nxt = hutchinson(ifs, current)
        nxt.occ &= current.occ  # monotone by construction; enforce exactly
        if np.array_equal(nxt.occ, current.occ):
            break
        current = nxt
    else:
        raise DidNotStabilizeError(
            f"attractor iteration did not stabilize in {max_iters} sweeps"
        )
    if current.is_empty:
        raise DidNotStabilizeError(
            "attractor iteration emptied the window; the window does not "
            "contain the attractor"
        )
    raster = current if work is grid else current.regrid(grid)
    consistency = hausdorff_distance(raster, hutchinson(ifs, raster))
    return AttractorApprox(
        raster=raster,
        ifs_name=ifs.name,
        iterations=iters,
        self_consistency=consistency,
    )


def chaos_game(
    ifs: IfsSystem, n_points: int, burn_in: int = 64, seed: int = 0
) -> list[Point]:
    """Random-orbit attractor samples, bit-reproducible for a given seed.

    Map indices come from a counter-based generator keyed by the seed, so
    the emitted stream is independent of scheduling.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    idx = rng.integers(1, ifs.n_maps + 1, size=n_points + burn_in)
    x = None
    for m in ifs.maps:
        x = fixed_point(m)
        if x is not None:
            break
    if x is None:
        raise ValueError("no map of the system has a fixed point to start from")
    out: list[Point] = []
    for k, i in enumerate(idx):
        x = apply(ifs.map(int(i)), x)
        if k >= burn_in:
            out.append(x)
    return out


def _gasket_branch(x: Fraction, y: Fraction) -> bool:
    half = Fraction(1, 2)
    if x < 0 or y < 0 or x + y > 1:
        return False
    # recurse into whichever corner subtriangle can contain the point
    if x <= half and y <= half:
        if _gasket_cached(2 * x, 2 * y):
            return True
    if x >= half:
        if _gasket_cached(2 * x - 1, 2 * y):
            return True
    if y >= half:
        if _gasket_cached(2 * x, 2 * y - 1):
            return True
    return False


@lru_cache(maxsize=1 << 16)
def _gasket_cached(x: Fraction, y: Fraction) -> bool:
    # terminal: dyadic recursion strictly reduces denominators, so a point
    # revisits itself only when both coordinates are 0- or 1-denominator
    if x.denominator == 1 and y.denominator == 1:
        return x >= 0 and y >= 0 and x + y <= 1
    return _gasket_branch(x, y)


def gasket_member(x, y) -> bool:
    """Exact membership in the right-angle gasket with vertices (0,0),
    (1,0), (0,1), for dyadic rational coordinates.

    A point belongs iff some corner-subdivision chain keeps it inside a
    corner subtriangle forever; for dyadic rationals the chain terminates.
    """
    fx, fy = Fraction(x), Fraction(y)
    for f in (fx, fy):
        k = (f.denominator - 1).bit_length()
        if f.denominator != 1 << k:
            raise ValueError("gasket membership needs dyadic rational coordinates")
    if not (0 <= fx <= 1 and 0 <= fy <= 1):
        return False
    return _gasket_cached(fx, fy)
