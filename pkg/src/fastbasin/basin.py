"""Fast basins with generation indices, continuations, and basin estimates.

Two independent algorithm families live here.  The inverse family
(:func:`fast_basin_inverse`, :func:`slow_basin`, :func:`continuation`)
transports the attractor raster backward through exactly inverted maps, so
its only approximation is the cell cover itself.  The forward family
(:func:`generation_forward`, :func:`generation_grid`) iterates words of
maps applied to query points and tests eps-proximity to the attractor; it
also serves as the cross-check oracle for the inverse family and is the
only route available when a system contains partially defined maps.

``basin_estimate`` approximates the basin of attraction: a cell is marked
when the whole Hutchinson orbit of the cell provably enters the
eps-neighborhood of the attractor within K steps.  It is realized as a
universal-predecessor recurrence: P_0 is the eps-collar of the attractor,
and P_k holds the cells whose forward covers under every map land inside
P_{k-1}.  Orbit branches that leave the computation region (or hit a
fractional-linear pole) are treated as never converging, which keeps the
estimate one-sided.
"""

import struct
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .attractor import AttractorApprox, grid_for
from .errors import (
    InvalidRadiusError,
    OutsideDomainError,
    PartialMapsUnsupportedError,
    UnsupportedSpaceError,
)
from .ifs import (
    Affine2,
    ComplexAffine2,
    IfsSystem,
    MapSpec,
    Moebius1,
    Point,
    Space,
    Window,
    Word,
    apply,
    compose,
    invert,
)
from .raster import CellRaster, Grid, cover_index_ranges, forward_hits, transport

UNSET = 255

_FBG_MAGIC = b"FBG1"
_FBG_HEADER = struct.Struct("<II4d")


# ---------------------------------------------------------------------------
# generation fields


@dataclass(frozen=True)
class GenerationField:
    """Per-cell minimal generation indices over a raster grid.

    ``gen[j, i]`` is the least number of map applications taking cell
    (i, j) onto the attractor raster, 0 on the attractor itself, and 255
    (:data:`UNSET`) when no generation ≤ K was found.  ``eps`` records the
    membership tolerance of the forward algorithm and is 0.0 for the exact
    inverse algorithm.
    """

    grid: Grid
    gen: np.ndarray
    K: int
    eps: float = 0.0

    def __post_init__(self):
        if self.gen.shape != self.grid.shape:
            raise ValueError("generation array does not match the grid shape")
        if self.gen.dtype != np.uint8:
            raise ValueError("generation array must be uint8")
        if not 0 <= self.K <= 254:
            raise ValueError("K must lie in [0, 254]")

    @property
    def set_mask(self) -> np.ndarray:
        return self.gen != UNSET

    def raster_le(self, k: int) -> CellRaster:
        """Cells of generation ≤ k as a raster (level sets nest in k)."""
        return CellRaster(self.grid, self.gen <= min(k, 254))

    def as_raster(self) -> CellRaster:
        return CellRaster(self.grid, self.set_mask.copy())

    def count_of(self, k: int) -> int:
        return int(np.count_nonzero(self.gen == k))

    def to_bytes(self) -> bytes:
        g = self.grid
        head = _FBG_MAGIC + _FBG_HEADER.pack(
            g.nx, g.ny, g.window.xmin, g.window.ymin, g.window.xmax, g.window.ymax
        )
        return head + self.gen.tobytes()

    @staticmethod
    def from_bytes(data: bytes) -> "GenerationField":
        if data[:4] != _FBG_MAGIC:
            raise ValueError("not a generation-field payload (bad magic)")
        nx, ny, xmin, ymin, xmax, ymax = _FBG_HEADER.unpack_from(data, 4)
        grid = Grid(Window(xmin, ymin, xmax, ymax), nx, ny)
        body = data[4 + _FBG_HEADER.size:]
        if len(body) != nx * ny:
            raise ValueError("generation payload size does not match geometry")
        gen = np.frombuffer(body, dtype=np.uint8).reshape(ny, nx).copy()
        levels = gen[gen != UNSET]
        k = int(levels.max()) if levels.size else 0
        return GenerationField(grid, gen, k)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @staticmethod
    def load(path) -> "GenerationField":
        with open(path, "rb") as f:
            return GenerationField.from_bytes(f.read())


def _source_raster(A: Union[AttractorApprox, CellRaster]) -> CellRaster:
    return A.raster if isinstance(A, AttractorApprox) else A


def _basin_grid(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    window: Optional[Window],
    nx: Optional[int],
) -> Grid:
    src = _source_raster(A)
    if window is None and nx is None:
        return src.grid
    window = Window(*window) if window is not None else src.grid.window
    nx = nx if nx is not None else src.grid.nx
    return grid_for(ifs, window, nx)


def _require_total(ifs: IfsSystem, operation: str) -> None:
    if ifs.has_partial_maps:
        raise PartialMapsUnsupportedError(
            f"{operation} needs total invertible maps; "
            "use generation_forward for partially defined systems"
        )


def _check_k(K: int) -> None:
    if not 0 <= K <= 254:
        raise ValueError("K must lie in [0, 254]")


# ---------------------------------------------------------------------------
# inverse algorithm


def fast_basin_inverse(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    window: Optional[Window] = None,
    nx: Optional[int] = None,
    K: int = 4,
) -> GenerationField:
    """Generation field by inverse raster transport.

    S_0 is the attractor raster; S_{k+1} adds the inverse images of S_k
    under every map, clipped to the window; a cell's generation is the
    first sweep that covers it.  Only the frontier (cells new in S_k) is
    transported each sweep, which is exact because inverse images of
    already-covered cells were covered by the previous sweep.
    """
    _require_total(ifs, "fast_basin_inverse")
    _check_k(K)
    grid = _basin_grid(ifs, A, window, nx)
    seed = _source_raster(A).regrid(grid)
    gen = np.full(grid.shape, UNSET, dtype=np.uint8)
    gen[seed.occ] = 0
    frontier = seed.occ
    for k in range(1, K + 1):
        if not frontier.any():
            break
        src = CellRaster(grid, frontier)
        reached = np.zeros(grid.shape, dtype=bool)
        for i in range(1, ifs.n_maps + 1):
            reached |= transport(ifs.map(i), src, grid, inverse=True).occ
        frontier = reached & (gen == UNSET)
        gen[frontier] = k
    return GenerationField(grid, gen, K, 0.0)


# ---------------------------------------------------------------------------
# forward algorithm


class RasterDistanceOracle:
    """Euclidean distance from a point to the closed occupied-cell union.

    Queries resolve through a KD-tree over occupied cell centers; the exact
    point-to-box distance is then minimized over every candidate box close
    enough to matter.  Calling the oracle with a point outside the raster
    window is valid.
    """

    def __init__(self, raster: CellRaster):
        from scipy.spatial import cKDTree

        self._h = raster.grid.h
        centers = raster.occupied_centers()
        if centers.size == 0:
            raise ValueError("cannot build a distance oracle on an empty raster")
        # line rasters carry a constant y center; queries reuse it so the
        # 2D metric collapses to |dx|
        self._line_y = float(centers[0, 1]) if raster.grid.is_line else None
        self._tree = cKDTree(centers)
        self.diameter = float(
            np.linalg.norm(centers.max(axis=0) - centers.min(axis=0))
        ) + self._h * np.sqrt(2.0)

    def __call__(self, x: Point) -> float:
        if x.at_infinity:
            return float("inf")
        if self._line_y is not None:
            p = np.array([float(x.coords[0]), self._line_y])
        else:
            p = np.array([float(x.coords[0]), float(x.coords[1])])
        d_center, _ = self._tree.query(p)
        half = self._h / 2.0
        # all boxes whose center lies within this radius can beat d_center
        radius = d_center + self._h
        idxs = self._tree.query_ball_point(p, radius)
        best = float("inf")
        for i in idxs:
            c = self._tree.data[i]
            dx = max(abs(p[0] - c[0]) - half, 0.0)
            dy = max(abs(p[1] - c[1]) - half, 0.0)
            best = min(best, float(np.hypot(dx, dy)))
        return best


DistanceOracle = Callable[[Point], float]


def _min_stretch(m: MapSpec) -> float:
    """Global lower Lipschitz bound of a map, 0.0 when region-dependent."""
    if isinstance(m, Affine2):
        j = np.array([[m.a, m.b], [m.c, m.d]], dtype=float)
        return float(np.linalg.svd(j, compute_uv=False)[-1])
    if isinstance(m, ComplexAffine2):
        blocks = np.zeros((4, 4))
        for (r, c), z in (((0, 0), m.m11), ((2, 0), m.m21), ((2, 2), m.m22)):
            zz = complex(z)
            blocks[r: r + 2, c: c + 2] = [[zz.real, -zz.imag], [zz.imag, zz.real]]
        return float(np.linalg.svd(blocks, compute_uv=False)[-1])
    return 0.0


def generation_forward(
    ifs: IfsSystem,
    x: Point,
    A: DistanceOracle,
    K: int = 8,
    eps: float = 0.0,
    a_diam: Optional[float] = None,
) -> Optional[int]:
    """Least k ≤ K such that some length-k word maps x within eps of A.

    ``A`` is a distance oracle: a callable returning the distance from a
    point to the attractor (a :class:`RasterDistanceOracle`, or an exact
    function — Fraction inputs flow through untouched, enabling exact
    rational arithmetic with eps = 0).  The word tree is searched
    depth-first at increasing depth targets, so the returned k is minimal;
    map indices are explored in ascending order but the result is
    order-independent.  When ``a_diam`` (the attractor diameter) is given
    and every map has a positive global lower Lipschitz bound s, a branch
    at remaining depth m is pruned when s^m·d(p, A) − a_diam > eps, which
    no descendant can beat.  Returns None when no word of length ≤ K lands.
    """
    _check_k(K)
    if a_diam is None and isinstance(A, RasterDistanceOracle):
        a_diam = A.diameter
    maps = [ifs.map(i) for i in range(1, ifs.n_maps + 1)]
    s_min = min((_min_stretch(m) for m in maps), default=0.0)
    can_prune = a_diam is not None and s_min > 0.0

    def leaves_hit(p: Point, depth: int) -> bool:
        if depth == 0:
            return A(p) <= eps
        if can_prune and not p.at_infinity:
            if (s_min ** depth) * float(A(p)) - a_diam > eps:
                return False
        for m in maps:
            try:
                q = apply(m, p)
            except OutsideDomainError:
                continue  # outside a partial map's domain: branch is void
            if leaves_hit(q, depth - 1):
                return True
        return False

    for target in range(K + 1):
        if leaves_hit(x, target):
            return target
    return None


_MAX_WORDS = 250_000


def generation_grid(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    window: Optional[Window] = None,
    nx: Optional[int] = None,
    K: int = 4,
    eps: float = 0.0,
) -> GenerationField:
    """Forward generation search batched over all cells at once.

    The raster counterpart of :func:`generation_forward`: a cell gets
    generation k when the forward image of its box under some length-k
    word meets the (eps-dilated) attractor raster.  Each word's forward
    composition is exact, the cell's own box is contracted into the
    attractor's neighborhood, and membership is queried on the attractor
    raster's own grid, so the cover carries no dilation and level sets
    tighten as the attractor source gets finer — unlike
    :func:`fast_basin_inverse`, whose specified sweep recurrence pushes
    outer covers through inverse maps and re-rasterizes every level (the
    two are compared in the test suite).  With the default eps = 0.0
    membership is the source raster cover itself; generation 0 is then
    exactly the attractor raster resampled onto the output grid.

    Word enumeration is exhaustive (all n_maps^k words per level), so K
    must stay moderate; the operation refuses beyond 250000 total words.
    """
    _require_total(ifs, "generation_grid")
    _check_k(K)
    total_words = sum(ifs.n_maps ** k for k in range(1, K + 1))
    if total_words > _MAX_WORDS:
        raise ValueError(
            f"generation_grid enumerates {total_words} words at K={K}; "
            f"the limit is {_MAX_WORDS} — lower K or use fast_basin_inverse"
        )
    grid = _basin_grid(ifs, A, window, nx)
    eps = float(eps)
    src = _source_raster(A)
    if eps > 0.0:
        member = CellRaster(src.grid, src.distance_field() <= eps)
    else:
        member = src
    seed = member.regrid(grid)

    gen = np.full(grid.shape, UNSET, dtype=np.uint8)
    gen[seed.occ] = 0

    maps = [ifs.map(i) for i in range(1, ifs.n_maps + 1)]
    frontier: List[Optional[MapSpec]] = [None]  # composed forward words
    for k in range(1, K + 1):
        jj, ii = np.nonzero(gen == UNSET)
        if ii.size == 0:
            break
        bx0 = grid.window.xmin + ii * grid.h
        bx1 = bx0 + grid.h
        if grid.is_line:
            by0 = by1 = np.zeros_like(bx0)
        else:
            by0 = grid.window.ymin + jj * grid.h
            by1 = by0 + grid.h
        nxt: List[MapSpec] = []
        for comp in frontier:
            for m in maps:
                # words grow at the tail: w_{θ1..θk} = w_{θ1..θk-1} ∘ w_{θk}
                nxt.append(m if comp is None else compose(comp, m))
        for comp in nxt:
            covered = forward_hits(comp, member, bx0, bx1, by0, by1)
            gen[jj[covered], ii[covered]] = k
        frontier = nxt
    return GenerationField(grid, gen, K, eps)


# ---------------------------------------------------------------------------
# fractal continuation


@dataclass(frozen=True)
class ContinuationApprox:
    """Rasters of the ascending inverse-image union along one word prefix.

    ``stages[k]`` approximates the image of the attractor under the
    composition of the inverses of the first k prefix maps; stage 0 is the
    attractor raster itself.  Stages ascend (up to cover slack) because
    each map sends the attractor into itself.
    """

    word_prefix: Word
    stages: Tuple[CellRaster, ...]

    @property
    def grid(self) -> Grid:
        return self.stages[0].grid

    def final(self) -> CellRaster:
        return self.stages[-1]


def continuation(
    ifs: IfsSystem,
    theta_prefix: Word,
    A: Union[AttractorApprox, CellRaster],
    window: Optional[Window] = None,
    nx: Optional[int] = None,
) -> ContinuationApprox:
    """Stage-by-stage continuation of the attractor along a word prefix.

    Each stage composes the exact inverse maps first and performs a single
    raster transport from the original attractor raster, so cover slack
    does not compound across stages.
    """
    _require_total(ifs, "continuation")
    for idx in theta_prefix:
        if not 1 <= idx <= ifs.n_maps:
            raise ValueError(f"word index {idx} outside 1..{ifs.n_maps}")
    grid = _basin_grid(ifs, A, window, nx)
    src = _source_raster(A)
    stages: List[CellRaster] = [src.regrid(grid)]
    composed: Optional[MapSpec] = None
    for idx in theta_prefix:
        inv = invert(ifs.map(idx))
        composed = inv if composed is None else compose(composed, inv)
        stages.append(transport(composed, src, grid))
    return ContinuationApprox(tuple(theta_prefix), tuple(stages))


# ---------------------------------------------------------------------------
# slow basin


def slow_basin(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    r: float,
    window: Optional[Window] = None,
    nx: Optional[int] = None,
    K: int = 4,
) -> CellRaster:
    """Union of inverse images of the r-neighborhood of the attractor.

    The same sweep as :func:`fast_basin_inverse`, seeded with every cell
    whose center lies within distance r of the attractor raster.  The
    caller chooses r below the basin margin it trusts (default guidance:
    a few cell widths).
    """
    if not r > 0:
        raise InvalidRadiusError("slow-basin radius must be positive")
    _require_total(ifs, "slow_basin")
    _check_k(K)
    grid = _basin_grid(ifs, A, window, nx)
    seed_raster = _source_raster(A).regrid(grid)
    covered = seed_raster.distance_field() <= r
    frontier = covered.copy()
    for _ in range(K):
        if not frontier.any():
            break
        src = CellRaster(grid, frontier)
        reached = np.zeros(grid.shape, dtype=bool)
        for i in range(1, ifs.n_maps + 1):
            reached |= transport(ifs.map(i), src, grid, inverse=True).occ
        frontier = reached & ~covered
        covered |= frontier
    return CellRaster(grid, covered)


# ---------------------------------------------------------------------------
# basin-of-attraction estimate


def basin_estimate(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    window: Optional[Window] = None,
    nx: Optional[int] = None,
    K: int = 8,
    eps: Optional[float] = None,
) -> CellRaster:
    """Cells whose full Hutchinson orbit provably enters the eps-collar.

    A cell is marked when, for some k ≤ K, every branch of the k-step
    forward orbit of the cell lies within eps of the attractor raster.
    Branches are tracked at cell resolution through the forward covers of
    every map (the orbit pruning that bounds growth); a branch leaving the
    computation region or crossing a pole counts as non-convergent, so the
    estimate stays one-sided.
    """
    _require_total(ifs, "basin_estimate")
    _check_k(K)
    grid = _basin_grid(ifs, A, window, nx)
    eps = grid.h if eps is None else float(eps)
    if grid.is_line:
        return _basin_estimate_line(ifs, A, grid, K, eps)
    if ifs.space is Space.PLANE2:
        return _basin_estimate_plane(ifs, A, grid, K, eps)
    raise UnsupportedSpaceError(
        f"basin_estimate has no raster realization on {ifs.space.value}"
    )


def _extended_grid(ifs: IfsSystem, grid: Grid, a_window: Window, K: int) -> Grid:
    """Grid-aligned superset window closed under K forward bbox steps."""
    h = grid.h
    w = grid.window
    lo_x, lo_y = min(w.xmin, a_window.xmin), min(w.ymin, a_window.ymin)
    hi_x, hi_y = max(w.xmax, a_window.xmax), max(w.ymax, a_window.ymax)
    cur = (w.xmin, w.ymin, w.xmax, w.ymax)
    for _ in range(K):
        x0, y0, x1, y1 = cur
        nx0 = ny0 = float("inf")
        nx1 = ny1 = float("-inf")
        for m in ifs.maps:
            xs = np.array([x0, x0, x1, x1])
            ys = np.array([y0, y1, y0, y1])
            u = m.a * xs + m.b * ys + m.tx
            v = m.c * xs + m.d * ys + m.ty
            nx0, nx1 = min(nx0, u.min()), max(nx1, u.max())
            ny0, ny1 = min(ny0, v.min()), max(ny1, v.max())
        cur = (nx0, ny0, nx1, ny1)
        lo_x, lo_y = min(lo_x, nx0), min(lo_y, ny0)
        hi_x, hi_y = max(hi_x, nx1), max(hi_y, ny1)
        if x0 <= nx0 and y0 <= ny0 and nx1 <= x1 and ny1 <= y1:
            break
    pad_l = int(np.ceil((w.xmin - lo_x) / h - 1e-9)) if lo_x < w.xmin else 0
    pad_b = int(np.ceil((w.ymin - lo_y) / h - 1e-9)) if lo_y < w.ymin else 0
    pad_r = int(np.ceil((hi_x - w.xmax) / h - 1e-9)) if hi_x > w.xmax else 0
    pad_t = int(np.ceil((hi_y - w.ymax) / h - 1e-9)) if hi_y > w.ymax else 0
    window = Window(
        w.xmin - pad_l * h,
        w.ymin - pad_b * h,
        w.xmax + pad_r * h,
        w.ymax + pad_t * h,
    )
    return Grid(window, grid.nx + pad_l + pad_r, grid.ny + pad_b + pad_t)


def _basin_estimate_plane(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    grid: Grid,
    K: int,
    eps: float,
) -> CellRaster:
    src = _source_raster(A)
    ext = _extended_grid(ifs, grid, src.grid.window, K)
    seed = src.regrid(ext)
    P = seed.distance_field() <= eps
    marked = P.copy()

    # forward cover index ranges of every extended cell, one set per map
    h = ext.h
    flat_j, flat_i = np.divmod(np.arange(ext.nx * ext.ny), ext.nx)
    x0 = ext.window.xmin + flat_i * h
    y0 = ext.window.ymin + flat_j * h
    per_map = []
    for m in ifs.maps:
        cx = [m.a * x0 + m.b * y0, m.a * (x0 + h) + m.b * y0,
              m.a * x0 + m.b * (y0 + h), m.a * (x0 + h) + m.b * (y0 + h)]
        cy = [m.c * x0 + m.d * y0, m.c * (x0 + h) + m.d * y0,
              m.c * x0 + m.d * (y0 + h), m.c * (x0 + h) + m.d * (y0 + h)]
        ux = np.stack(cx)
        vy = np.stack(cy)
        i0, i1, j0, j1, _, inside = cover_index_ranges(
            ext,
            ux.min(axis=0) + m.tx, ux.max(axis=0) + m.tx,
            vy.min(axis=0) + m.ty, vy.max(axis=0) + m.ty,
        )
        area = (i1 - i0 + 1) * (j1 - j0 + 1)
        per_map.append((i0, i1, j0, j1, area, inside))

    prefix = np.zeros((ext.ny + 1, ext.nx + 1), dtype=np.int64)
    for _ in range(K):
        np.cumsum(np.cumsum(P, axis=0), axis=1, out=prefix[1:, 1:])
        new_p = np.ones(ext.nx * ext.ny, dtype=bool)
        for i0, i1, j0, j1, area, inside in per_map:
            cnt = (
                prefix[j1 + 1, i1 + 1]
                - prefix[j0, i1 + 1]
                - prefix[j1 + 1, i0]
                + prefix[j0, i0]
            )
            new_p &= inside & (cnt == area)
        new_p = new_p.reshape(ext.ny, ext.nx)
        if not new_p.any() or np.array_equal(new_p, P):
            P = new_p
            marked |= P
            break
        P = new_p
        marked |= P

    oi = int(round((grid.window.xmin - ext.window.xmin) / h))
    oj = int(round((grid.window.ymin - ext.window.ymin) / h))
    sub = marked[oj: oj + grid.ny, oi: oi + grid.nx]
    return CellRaster(grid, sub.copy())


_LINE_REFINE = 9


def _basin_estimate_line(
    ifs: IfsSystem,
    A: Union[AttractorApprox, CellRaster],
    grid: Grid,
    K: int,
    eps: float,
) -> CellRaster:
    # Work on an internally refined grid: near a map's slow region (fixed
    # points, where the displacement per step drops below one cell width)
    # the orbit-box recurrence cannot advance, so cell granularity decides
    # the marked boundary.  An odd refinement factor keeps every requested
    # cell center interior to one fine cell, which then reports its mark.
    fine = Grid.line(grid.window.xmin, grid.window.xmax, grid.nx * _LINE_REFINE)
    src = _source_raster(A)
    seed = src.regrid(fine)
    P = (seed.distance_field() <= eps)[0]
    marked = P.copy()

    w, h = fine.window, fine.h
    x0 = w.xmin + np.arange(fine.nx) * h
    x1 = x0 + h
    zeros = np.zeros(fine.nx)
    per_map = []
    for m in ifs.maps:
        if not isinstance(m, Moebius1):
            raise UnsupportedSpaceError("line basin estimates take Moebius maps")
        pole = m.pole
        with np.errstate(divide="ignore", invalid="ignore"):
            v0 = (m.p * x0 + m.q) / (m.r * x0 + m.s)
            v1 = (m.p * x1 + m.q) / (m.r * x1 + m.s)
        bad = np.zeros(fine.nx, dtype=bool)
        if pole is not None:
            bad |= (x0 <= pole) & (pole <= x1)
        lo = np.where(bad, 0.0, np.minimum(v0, v1))
        hi = np.where(bad, 0.0, np.maximum(v0, v1))
        i0, i1, _, _, _, inside = cover_index_ranges(fine, lo, hi, zeros, zeros)
        bad |= ~inside
        area = i1 - i0 + 1
        per_map.append((i0, i1, area, bad))

    prefix = np.zeros(fine.nx + 1, dtype=np.int64)
    for _ in range(K):
        np.cumsum(P, out=prefix[1:])
        new_p = np.ones(fine.nx, dtype=bool)
        for i0, i1, area, bad in per_map:
            cnt = prefix[i1 + 1] - prefix[i0]
            new_p &= ~bad & (cnt == area)
        if not new_p.any() or np.array_equal(new_p, P):
            P = new_p
            marked |= P
            break
        P = new_p
        marked |= P

    # a requested cell reports the fine cell holding its center
    centers = marked[_LINE_REFINE // 2:: _LINE_REFINE][: grid.nx]
    return CellRaster(grid, centers[np.newaxis, :].copy())
