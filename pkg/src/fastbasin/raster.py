"""Windowed cell rasters: outer approximations of planar or linear sets.

A raster is a boolean occupancy grid over an axis-aligned window with square
cells of side h.  Occupied cells are interpreted as closed cells, so the
occupied region is a closed outer cover of whatever set was rasterized.
Row 0 of the occupancy array is the minimum-y row; column 0 is minimum-x.

Transport maps an occupied set through a map (forward or inverse) into a
destination grid, covering each image cell outer-approximately: the four
corners of every occupied source cell are mapped, and all destination cells
meeting the bounding box of the mapped corners are filled.  For the axis
preserving map families shipped here (scalings, quarter-turn similitudes,
componentwise monotone maps) the corner bounding box equals the exact image
hull, so no cover tightness is lost.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import FastbasinError, PartialMapsUnsupportedError, UnsupportedSpaceError
from .ifs import Affine2, ComplexAffine2, HalfSqrt, MapSpec, Moebius1, Window, invert

__all__ = ["Grid", "CellRaster", "transport", "hausdorff_distance"]

_REL_TOL = 1e-12
_FBR1_MAGIC = b"FBR1"


@dataclass(frozen=True)
class Grid:
    """Geometry of a raster: window plus cell counts with square cells."""

    window: Window
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise FastbasinError(f"grid needs positive cell counts, got {self.nx}x{self.ny}")
        w = self.window
        if not (w.xmax > w.xmin and w.ymax > w.ymin):
            raise FastbasinError(f"degenerate window {w}")
        hx = (w.xmax - w.xmin) / self.nx
        hy = (w.ymax - w.ymin) / self.ny
        if abs(hx - hy) > _REL_TOL * max(abs(hx), abs(hy)):
            raise FastbasinError(
                f"cells are not square: hx={hx!r} hy={hy!r} for window {w}"
            )

    @property
    def h(self) -> float:
        return (self.window.xmax - self.window.xmin) / self.nx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def is_line(self) -> bool:
        return self.ny == 1

    @staticmethod
    def square(window: Window, nx: int) -> "Grid":
        """Grid over a window whose aspect ratio is compatible with nx."""
        h = (window.xmax - window.xmin) / nx
        ny = int(round((window.ymax - window.ymin) / h))
        return Grid(window, nx, max(ny, 1))

    @staticmethod
    def line(xmin: float, xmax: float, nx: int) -> "Grid":
        """One-row grid for subsets of the line."""
        h = (xmax - xmin) / nx
        return Grid(Window(xmin, 0.0, xmax, h), nx, 1)

    def x_edges(self) -> np.ndarray:
        return self.window.xmin + self.h * np.arange(self.nx + 1)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(x centers of columns, y centers of rows)."""
        h = self.h
        xs = self.window.xmin + h * (np.arange(self.nx) + 0.5)
        ys = self.window.ymin + h * (np.arange(self.ny) + 0.5)
        return xs, ys

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """(ix, iy) of the half-open cell containing the point, or None."""
        h = self.h
        ix = int(np.floor((x - self.window.xmin) / h))
        iy = int(np.floor((y - self.window.ymin) / h))
        if 0 <= ix < self.nx and 0 <= iy < self.ny:
            return ix, iy
        return None


@dataclass
class CellRaster:
    """Occupancy raster over a grid; a closed outer cover of a set."""

    grid: Grid
    occ: np.ndarray

    def __post_init__(self):
        if self.occ.shape != self.grid.shape:
            raise FastbasinError(
                f"occupancy shape {self.occ.shape} != grid shape {self.grid.shape}"
            )
        if self.occ.dtype != np.bool_:
            self.occ = self.occ.astype(bool)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def empty(grid: Grid) -> "CellRaster":
        return CellRaster(grid, np.zeros(grid.shape, dtype=bool))

    @staticmethod
    def full(grid: Grid) -> "CellRaster":
        return CellRaster(grid, np.ones(grid.shape, dtype=bool))

    # -- basic queries ------------------------------------------------------

    @property
    def count(self) -> int:
        return int(self.occ.sum())

    @property
    def is_empty(self) -> bool:
        return not self.occ.any()

    def contains_point(self, x: float, y: float = 0.0) -> bool:
        cell = self.grid.cell_of(x, y)
        return cell is not None and bool(self.occ[cell[1], cell[0]])

    def occupied_centers(self) -> np.ndarray:
        """(n, 2) array of occupied cell centers."""
        jj, ii = np.nonzero(self.occ)
        xs, ys = self.grid.cell_centers()
        return np.column_stack([xs[ii], ys[jj]])

    def copy(self) -> "CellRaster":
        return CellRaster(self.grid, self.occ.copy())

    # -- set operations -----------------------------------------------------

    def union(self, other: "CellRaster") -> "CellRaster":
        self._check_same_grid(other)
        return CellRaster(self.grid, self.occ | other.occ)

    def is_subset_of(self, other: "CellRaster") -> bool:
        self._check_same_grid(other)
        return not (self.occ & ~other.occ).any()

    def dilate(self, cells: int = 1) -> "CellRaster":
        """Chebyshev dilation by a number of cells."""
        if cells <= 0:
            return self.copy()
        structure = np.ones((3, 3), dtype=bool)
        occ = ndimage.binary_dilation(self.occ, structure=structure, iterations=cells)
        return CellRaster(self.grid, occ)

    def distance_field(self) -> np.ndarray:
        """Euclidean distance (length units) from each cell center to the
        nearest occupied cell center; +inf everywhere when empty."""
        if self.is_empty:
            return np.full(self.grid.shape, np.inf)
        h = self.grid.h
        return ndimage.distance_transform_edt(~self.occ, sampling=(h, h))

    def regrid(self, grid: Grid) -> "CellRaster":
        """Outer resample: mark every target cell meeting an occupied cell."""
        out = np.zeros(grid.shape, dtype=bool)
        jj, ii = np.nonzero(self.occ)
        if ii.size:
            h = self.grid.h
            x0 = self.grid.window.xmin + ii * h
            y0 = self.grid.window.ymin + jj * h
            _cover_boxes(out, grid, x0, x0 + h, y0, y0 + h)
        return CellRaster(grid, out)

    def _check_same_grid(self, other: "CellRaster"):
        if self.grid != other.grid:
            raise FastbasinError("rasters are on different grids")

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        """FBR1: magic, nx/ny as u32 LE, window as 4 f64 LE, then the
        occupancy bits packed row-major (min-y row first, MSB first)."""
        head = _FBR1_MAGIC + struct.pack(
            "<II4d", self.grid.nx, self.grid.ny, *self.grid.window
        )
        bits = np.packbits(self.occ.reshape(-1).astype(np.uint8))
        return head + bits.tobytes()

    @staticmethod
    def from_bytes(data: bytes) -> "CellRaster":
        if data[:4] != _FBR1_MAGIC:
            raise FastbasinError("not an FBR1 raster (bad magic)")
        nx, ny, xmin, ymin, xmax, ymax = struct.unpack_from("<II4d", data, 4)
        grid = Grid(Window(xmin, ymin, xmax, ymax), nx, ny)
        need = (nx * ny + 7) // 8
        payload = data[4 + struct.calcsize("<II4d"):]
        if len(payload) < need:
            raise FastbasinError("truncated FBR1 raster")
        bits = np.unpackbits(np.frombuffer(payload[:need], dtype=np.uint8))
        occ = bits[: nx * ny].astype(bool).reshape((ny, nx))
        return CellRaster(grid, occ)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @staticmethod
    def load(path) -> "CellRaster":
        with open(path, "rb") as fh:
            return CellRaster.from_bytes(fh.read())


# ---------------------------------------------------------------------------
# transport


def transport(
    m: MapSpec, src: CellRaster, dst: Grid, inverse: bool = False
) -> CellRaster:
    """Outer cover of the (forward or inverse) image of the occupied region.

    Content mapping outside the destination window is clipped; on the
    extended line, content mapping to infinity is dropped with the rays
    around it covered out to the window edge.
    """
    if isinstance(m, Affine2):
        spec = invert(m) if inverse else m
        return _transport_affine(spec, src, dst)
    if isinstance(m, Moebius1):
        spec = invert(m) if inverse else m
        return _transport_moebius(spec, src, dst)
    if isinstance(m, HalfSqrt):
        if inverse:
            return _transport_halfsqrt_inverse(m, src, dst)
        return _transport_halfsqrt_forward(m, src, dst)
    if isinstance(m, ComplexAffine2):
        raise UnsupportedSpaceError("cplane2 sets have no planar raster transport")
    raise TypeError(f"unknown map type {type(m).__name__}")


def cover_index_ranges(grid: Grid, ux0, ux1, uy0, uy1):
    """Inclusive cell index ranges covering boxes clamped to the window.

    Returns ``(i0, i1, j0, j1, overlaps, inside)``: per-box index ranges of
    the cells whose open interior meets the clamped box (a degenerate or
    touching box resolves to the single cell whose closed extent contains
    it), a mask of boxes meeting the closed window at all, and a mask of
    boxes lying entirely inside it.  Ranges are valid only where
    ``overlaps`` holds.
    """
    w, h = grid.window, grid.h
    inside = (ux0 >= w.xmin) & (ux1 <= w.xmax) & (uy0 >= w.ymin) & (uy1 <= w.ymax)
    cx0 = np.maximum(ux0, w.xmin)
    cx1 = np.minimum(ux1, w.xmax)
    cy0 = np.maximum(uy0, w.ymin)
    cy1 = np.minimum(uy1, w.ymax)
    overlaps = (cx0 <= cx1) & (cy0 <= cy1)
    i0 = np.floor((cx0 - w.xmin) / h).astype(np.int64)
    i1 = np.ceil((cx1 - w.xmin) / h).astype(np.int64) - 1
    j0 = np.floor((cy0 - w.ymin) / h).astype(np.int64)
    j1 = np.ceil((cy1 - w.ymin) / h).astype(np.int64) - 1
    i1 = np.maximum(i1, i0)
    j1 = np.maximum(j1, j0)
    i0 = np.clip(i0, 0, grid.nx - 1)
    i1 = np.clip(i1, 0, grid.nx - 1)
    j0 = np.clip(j0, 0, grid.ny - 1)
    j1 = np.clip(j1, 0, grid.ny - 1)
    return i0, i1, j0, j1, overlaps, inside


def _cover_boxes(out, grid: Grid, ux0, ux1, uy0, uy1):
    """Fill all cells whose open interior meets a box [ux0,ux1]x[uy0,uy1].

    A box edge landing exactly on a cell boundary does not bleed into the
    neighboring cell on either side; the cover stays a sound closed outer
    approximation because boundary points also belong to the closed cell
    below them.  Boxes are clamped to the window first, so a box that only
    touches the window (or degenerates to a point) still marks the cell
    whose closed extent contains the touch.
    """
    i0, i1, j0, j1, overlaps, _ = cover_index_ranges(grid, ux0, ux1, uy0, uy1)
    if not overlaps.any():
        return
    i0, i1, j0, j1 = i0[overlaps], i1[overlaps], j0[overlaps], j1[overlaps]
    di = int((i1 - i0).max())
    dj = int((j1 - j0).max())
    if (di + 1) * (dj + 1) <= max(64, i0.size):
        # few offsets, many boxes: sweep offsets vectorized
        for b in range(dj + 1):
            jj = j0 + b
            mj = jj <= j1
            for a in range(di + 1):
                ii = i0 + a
                mm = mj & (ii <= i1)
                out[jj[mm], ii[mm]] = True
    else:
        # few boxes with large extents: fill each directly
        for k in range(i0.size):
            out[j0[k]: j1[k] + 1, i0[k]: i1[k] + 1] = True


def _occupied_cell_boxes(src: CellRaster):
    jj, ii = np.nonzero(src.occ)
    h = src.grid.h
    x0 = src.grid.window.xmin + ii * h
    y0 = src.grid.window.ymin + jj * h
    return x0, x0 + h, y0, y0 + h


def _transport_affine(m: Affine2, src: CellRaster, dst: Grid) -> CellRaster:
    out = np.zeros(dst.shape, dtype=bool)
    if not src.is_empty:
        x0, x1, y0, y1 = _occupied_cell_boxes(src)
        ax0, ax1 = m.a * x0, m.a * x1
        by0, by1 = m.b * y0, m.b * y1
        cx0, cx1 = m.c * x0, m.c * x1
        dy0, dy1 = m.d * y0, m.d * y1
        u = np.stack([ax0 + by0, ax0 + by1, ax1 + by0, ax1 + by1])
        v = np.stack([cx0 + dy0, cx0 + dy1, cx1 + dy0, cx1 + dy1])
        _cover_boxes(
            out, dst,
            u.min(axis=0) + m.tx, u.max(axis=0) + m.tx,
            v.min(axis=0) + m.ty, v.max(axis=0) + m.ty,
        )
    return CellRaster(dst, out)


def _transport_halfsqrt_forward(m: HalfSqrt, src: CellRaster, dst: Grid) -> CellRaster:
    out = np.zeros(dst.shape, dtype=bool)
    if not src.is_empty:
        x0, x1, y0, y1 = _occupied_cell_boxes(src)
        # clip to the strip domain; both components are monotone
        x0 = np.clip(x0, 0.0, 1.0)
        x1 = np.clip(x1, 0.0, 1.0)
        y0 = np.maximum(y0, 0.5)
        keep = (x1 >= x0) & (y1 >= y0)
        if keep.any():
            _cover_boxes(
                out, dst,
                x0[keep] / 2.0 + m.tx, x1[keep] / 2.0 + m.tx,
                np.sqrt(y0[keep]), np.sqrt(y1[keep]),
            )
    return CellRaster(dst, out)


def _transport_halfsqrt_inverse(m: HalfSqrt, src: CellRaster, dst: Grid) -> CellRaster:
    out = np.zeros(dst.shape, dtype=bool)
    if not src.is_empty:
        x0, x1, y0, y1 = _occupied_cell_boxes(src)
        lo, hi, vmin = m.tx, m.tx + 0.5, np.sqrt(0.5)
        cx0 = np.maximum(x0, lo)
        cx1 = np.minimum(x1, hi)
        cy0 = np.maximum(y0, vmin)
        keep = (cx1 >= cx0) & (y1 >= cy0)
        if not keep.all():
            raise PartialMapsUnsupportedError(
                "occupied cells fall outside the invertible image of a halfsqrt map"
            )
        _cover_boxes(
            out, dst,
            2.0 * (cx0 - m.tx), 2.0 * (cx1 - m.tx),
            cy0 * cy0, y1 * y1,
        )
    return CellRaster(dst, out)


def _transport_moebius(m: Moebius1, src: CellRaster, dst: Grid) -> CellRaster:
    """Interval transport on one-row rasters.

    A Moebius map is monotone away from its pole, so the image of a cell not
    containing the pole is the interval between its endpoint images; a cell
    containing the pole maps onto two rays, covered out to the window edge.
    """
    if not (src.grid.is_line and dst.is_line):
        raise UnsupportedSpaceError("moebius transport needs one-row rasters")
    out = np.zeros(dst.shape, dtype=bool)
    if src.is_empty:
        return CellRaster(dst, out)
    ii = np.nonzero(src.occ[0])[0]
    h = src.grid.h
    x0 = src.grid.window.xmin + ii * h
    x1 = x0 + h
    pole = m.pole

    if pole is None:
        regular = np.ones(x0.shape, dtype=bool)
    else:
        regular = ~((x0 <= pole) & (pole <= x1))
    if regular.any():
        e0 = _moebius_values(m, x0[regular])
        e1 = _moebius_values(m, x1[regular])
        lo = np.minimum(e0, e1)
        hi = np.maximum(e0, e1)
        _cover_boxes(out, dst, lo, hi, np.zeros_like(lo), np.zeros_like(lo))

    if pole is not None:
        for k in np.nonzero(~regular)[0]:
            _cover_pole_cell(out, dst, m, float(x0[k]), float(x1[k]))
    return CellRaster(dst, out)


def _moebius_values(m: Moebius1, x: np.ndarray) -> np.ndarray:
    return (m.p * x + m.q) / (m.r * x + m.s)


def _cover_pole_cell(out, dst: Grid, m: Moebius1, x0: float, x1: float):
    """Cover the two rays that a pole-containing cell maps onto."""
    sign = 1.0 if m.det > 0 else -1.0
    pole = m.pole
    w = dst.window
    if x0 < pole:
        # [x0, pole) maps toward sign * infinity
        e = float(_moebius_values(m, np.array([x0]))[0])
        if sign > 0:
            _cover_ray(out, dst, e, w.xmax)
        else:
            _cover_ray(out, dst, w.xmin, e)
    if pole < x1:
        # (pole, x1] comes from -sign * infinity
        e = float(_moebius_values(m, np.array([x1]))[0])
        if sign > 0:
            _cover_ray(out, dst, w.xmin, e)
        else:
            _cover_ray(out, dst, e, w.xmax)


def _cover_ray(out, dst: Grid, lo: float, hi: float):
    if hi < lo:
        return
    arr_lo = np.array([lo])
    arr_hi = np.array([hi])
    _cover_boxes(out, dst, arr_lo, arr_hi, np.zeros(1), np.zeros(1))


def _open_ranges(lo, hi, origin: float, h: float, n: int):
    """Index range of the cells whose open interior meets [lo, hi].

    Strictly open-interior: an interval that only touches a gridline, or
    lies beyond the raster, yields an empty range (i1 < i0).  Unlike the
    cover rules there is no boundary-touch fallback — a membership query
    that misses must stay a miss, or queries from outside the raster
    window would invent hits along its edge.
    """
    i0 = np.floor((np.asarray(lo) - origin) / h).astype(np.int64)
    i1 = np.ceil((np.asarray(hi) - origin) / h).astype(np.int64) - 1
    # a degenerate interval strictly inside a cell still queries that cell
    # (ceil(x) - 1 == floor(x) off the gridlines); on a gridline the range
    # comes out empty, which is the open-interior answer
    np.clip(i0, 0, None, out=i0)
    np.clip(i1, None, n - 1, out=i1)
    return i0, i1


def _range_hits(occ: np.ndarray, grid: Grid, ux0, ux1, uy0, uy1) -> np.ndarray:
    """Per-box mask: any occupied cell whose open interior meets the box.

    The gather counterpart of _cover_boxes, reading occupancy instead of
    writing it.  Contracted boxes span few cells, so offsets are swept
    vectorized over all boxes at once.
    """
    i0, i1 = _open_ranges(ux0, ux1, grid.window.xmin, grid.h, grid.nx)
    if grid.is_line:
        j0 = np.zeros_like(i0)
        j1 = np.zeros_like(i0)
    else:
        j0, j1 = _open_ranges(uy0, uy1, grid.window.ymin, grid.h, grid.ny)
    overlaps = (i0 <= i1) & (j0 <= j1)
    hit = np.zeros(np.shape(ux0), dtype=bool)
    if not overlaps.any():
        return hit
    di = int((i1[overlaps] - i0[overlaps]).max())
    dj = int((j1[overlaps] - j0[overlaps]).max())
    for b in range(dj + 1):
        jj = j0 + b
        mj = overlaps & (jj <= j1)
        for a in range(di + 1):
            ii = i0 + a
            mm = mj & (ii <= i1)
            if mm.any():
                hit[mm] |= occ[jj[mm], ii[mm]]
    return hit


def forward_hits(
    m: MapSpec, member: CellRaster, bx0, bx1, by0, by1
) -> np.ndarray:
    """Which of the given boxes meet `member` after mapping forward.

    Each box [bx0,bx1]x[by0,by1] is sent through the forward map and
    tested against the occupied region of `member`, using the same
    clamp-and-fill conventions as transport.  Because the box itself is
    contracted instead of occupied cells being expanded, the resulting
    inverse-image cover of `member` carries no dilation: this is the
    exact transpose of pushing `member` through the inverse map, minus
    the one-box-per-cell roundup that push accumulates.  Line rasters
    take by0 = by1 = 0; a Moebius pole inside a box marks it from the
    two rays the box maps onto.
    """
    if isinstance(m, Affine2):
        ax0, ax1 = m.a * bx0, m.a * bx1
        by_0, by_1 = m.b * by0, m.b * by1
        cx0, cx1 = m.c * bx0, m.c * bx1
        dy0, dy1 = m.d * by0, m.d * by1
        u = np.stack([ax0 + by_0, ax0 + by_1, ax1 + by_0, ax1 + by_1])
        v = np.stack([cx0 + dy0, cx0 + dy1, cx1 + dy0, cx1 + dy1])
        return _range_hits(
            member.occ, member.grid,
            u.min(axis=0) + m.tx, u.max(axis=0) + m.tx,
            v.min(axis=0) + m.ty, v.max(axis=0) + m.ty,
        )
    if isinstance(m, Moebius1):
        if not member.grid.is_line:
            raise UnsupportedSpaceError("moebius hits need a one-row raster")
        pole = m.pole
        if pole is None:
            regular = np.ones(np.shape(bx0), dtype=bool)
        else:
            regular = ~((bx0 <= pole) & (pole <= bx1))
        hit = np.zeros(np.shape(bx0), dtype=bool)
        if regular.any():
            e0 = _moebius_values(m, bx0[regular])
            e1 = _moebius_values(m, bx1[regular])
            lo = np.minimum(e0, e1)
            hi = np.maximum(e0, e1)
            zeros = np.zeros_like(lo)
            hit[regular] = _range_hits(
                member.occ, member.grid, lo, hi, zeros, zeros
            )
        if pole is not None:
            for k in np.nonzero(~regular)[0]:
                hit[k] = _pole_box_hits(
                    member, m, float(bx0[k]), float(bx1[k])
                )
        return hit
    raise TypeError(f"no forward box query for {type(m).__name__}")


def _pole_box_hits(member: CellRaster, m: Moebius1, x0: float, x1: float) -> bool:
    """Does a pole-containing interval's image (two rays) meet `member`?"""
    sign = 1.0 if m.det > 0 else -1.0
    w = member.grid.window
    rays = []
    if x0 < m.pole:
        e = float(_moebius_values(m, np.array([x0]))[0])
        rays.append((e, w.xmax) if sign > 0 else (w.xmin, e))
    if m.pole < x1:
        e = float(_moebius_values(m, np.array([x1]))[0])
        rays.append((w.xmin, e) if sign > 0 else (e, w.xmax))
    for lo, hi in rays:
        if hi < lo:
            continue
        got = _range_hits(
            member.occ, member.grid,
            np.array([lo]), np.array([hi]), np.zeros(1), np.zeros(1),
        )
        if bool(got[0]):
            return True
    return False


# ---------------------------------------------------------------------------
# distances


def hausdorff_distance(a: CellRaster, b: CellRaster) -> float:
    """Hausdorff distance between the occupied cell-center sets (same grid)."""
    if a.grid != b.grid:
        raise FastbasinError("hausdorff distance needs a common grid")
    if a.is_empty and b.is_empty:
        return 0.0
    if a.is_empty or b.is_empty:
        return float("inf")
    da = a.distance_field()
    db = b.distance_field()
    return float(max(db[a.occ].max(), da[b.occ].max()))
