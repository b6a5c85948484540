"""Numerical structure checks at desk scale.

Dimension, connectivity, and interior probes quantify how a fast basin
inherits the attractor's geometry; the criterion, expansivity, and
escape-time operations verify the quantitative hypotheses behind that
structure on concrete systems.  ``analyze`` bundles everything into
one machine-diffable report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .attractor import AttractorApprox, chaos_game, compute_attractor
from .basin import fast_basin_inverse
from .errors import (
    DegenerateScaleRangeError,
    EscapeSampleNotFoundError,
    FastbasinError,
    NotExpansiveError,
    PartialMapsUnsupportedError,
)
from .ifs import (
    IfsSystem,
    Point,
    Space,
    apply,
    apply_inverse,
    distance,
    fixed_point,
    inverse_expansivity,
    invert,
)
from .raster import CellRaster, hausdorff_distance, transport

SourceSet = Union[AttractorApprox, CellRaster]


def _source_raster(A: SourceSet) -> CellRaster:
    return A.raster if isinstance(A, AttractorApprox) else A


# ---------------------------------------------------------------------------
# geometry probes


def _block_count(occ: np.ndarray, b: int) -> int:
    """Number of b-by-b cell blocks containing at least one occupied cell."""
    jj, ii = np.nonzero(occ)
    width = occ.shape[1] // b + 1
    return int(np.unique((jj // b).astype(np.int64) * width + ii // b).size)


def box_dimension(
    raster: CellRaster,
    coarsest: Optional[int] = None,
    finest: Optional[int] = None,
) -> tuple[float, float]:
    """Least-squares box-counting dimension over dyadic block sizes.

    Blocks of side b cells tile the raster; the estimate is the slope of
    log(occupied-block count) against log(1 / (b * h)) with b halving
    from ``coarsest`` down to ``finest`` (defaults nx/4 down to 8 cells).
    Returns (slope, max absolute deviation of the log fit).  Fewer than
    three scales raise rather than extrapolate.
    """
    if raster.is_empty:
        raise FastbasinError("box dimension of an empty raster is undefined")
    nx = raster.grid.nx
    coarsest = nx // 4 if coarsest is None else int(coarsest)
    finest = 8 if finest is None else int(finest)
    for b in (coarsest, finest):
        if b < 1 or b & (b - 1) or nx % b:
            raise ValueError(
                f"block size {b} is not a power of two dividing nx={nx}"
            )
    scales = []
    b = coarsest
    while b >= finest:
        scales.append(b)
        b //= 2
    if len(scales) < 3:
        raise DegenerateScaleRangeError(
            f"only {len(scales)} dyadic scales from {coarsest} down to "
            f"{finest}; at least 3 are needed for a fit"
        )
    h = raster.grid.h
    xs = np.array([-math.log(b * h) for b in scales])
    ys = np.array([math.log(_block_count(raster.occ, b)) for b in scales])
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.max(np.abs(ys - (slope * xs + intercept))))
    return float(slope), residual


def connected_components(raster: CellRaster, adjacency: int = 8) -> int:
    """Count occupied components under 4- or 8-adjacency."""
    if adjacency not in (4, 8):
        raise ValueError("adjacency must be 4 or 8")
    structure = ndimage.generate_binary_structure(
        2, 1 if adjacency == 4 else 2
    )
    _, n = ndimage.label(raster.occ, structure=structure)
    return int(n)


def max_solid_square(raster: CellRaster) -> int:
    """Side length, in cells, of the largest fully occupied square.

    A solid square of side s contains solid squares of every smaller
    side, so the largest side is found by binary search, each candidate
    checked in one vectorized pass over an integral image.
    """
    occ = raster.occ
    if not occ.any():
        return 0
    ny, nx = occ.shape
    integral = np.zeros((ny + 1, nx + 1), dtype=np.int64)
    integral[1:, 1:] = occ.astype(np.int64).cumsum(axis=0).cumsum(axis=1)

    def has_solid(s: int) -> bool:
        area = (
            integral[s:, s:]
            - integral[:-s, s:]
            - integral[s:, :-s]
            + integral[:-s, :-s]
        )
        return bool((area == s * s).any())

    lo, hi = 1, min(ny, nx)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if has_solid(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


# ---------------------------------------------------------------------------
# nontriviality criterion


@dataclass(frozen=True)
class CriterionResult:
    """Per-map displacement of the attractor under its own maps.

    ``nontrivial`` means some map sends the attractor strictly inside
    itself (Hausdorff distance beyond tol).  For systems of invertible
    maps that is equivalent to the fast basin exceeding the attractor;
    when ``partial_maps`` is set the equivalence does not apply — the
    maps lack total inverses, and strict forward images can coexist with
    inverse images that reproduce the attractor exactly.
    """

    nontrivial: bool
    strict_indices: tuple[int, ...]
    per_map_hausdorff: tuple[float, ...]
    tol: float
    partial_maps: bool


def criterion_check(
    ifs: IfsSystem,
    A: Union[SourceSet, Sequence[Point]],
    tol: Optional[float] = None,
) -> CriterionResult:
    """Measure how far each map moves the attractor into itself.

    Accepts the attractor as a raster (tol defaults to three cell
    widths) or, for spaces without raster support, as a point-cloud
    sample (tol must then be given explicitly).  Distances are Hausdorff
    distances between the mapped set and the original.
    """
    if isinstance(A, (AttractorApprox, CellRaster)):
        src = _source_raster(A)
        if tol is None:
            tol = 3.0 * src.grid.h
        dists = [
            hausdorff_distance(transport(ifs.map(i), src, src.grid), src)
            for i in range(1, ifs.n_maps + 1)
        ]
    else:
        if tol is None:
            raise ValueError(
                "point-cloud criterion check needs an explicit tol"
            )
        pts = np.array([p.coords for p in A], dtype=float)
        base = cKDTree(pts)
        dists = []
        for i in range(1, ifs.n_maps + 1):
            mapped = np.array(
                [apply(ifs.map(i), p).coords for p in A], dtype=float
            )
            to_base = float(base.query(mapped)[0].max())
            to_mapped = float(cKDTree(mapped).query(pts)[0].max())
            dists.append(max(to_base, to_mapped))
    strict = tuple(i for i, d in enumerate(dists, start=1) if d > tol)
    return CriterionResult(
        nontrivial=bool(strict),
        strict_indices=strict,
        per_map_hausdorff=tuple(float(d) for d in dists),
        tol=float(tol),
        partial_maps=ifs.has_partial_maps,
    )


# ---------------------------------------------------------------------------
# reverse-dynamics expansivity


@dataclass(frozen=True)
class ExpansivityResult:
    """Outcome of the sampled inverse-expansion inequality."""

    ok: bool
    L: float
    L_tilde: float
    rho: float
    r0: float
    samples: int
    failures: int


def expansivity_check(
    ifs: IfsSystem,
    x0: Point,
    L_tilde: float,
    samples: int = 10_000,
    seed: int = 0,
) -> ExpansivityResult:
    """Sampled verification that inverse dynamics expand away from x0.

    With every inverse map expanding distances by at least L (L >
    L_tilde > 1) and rho the largest displacement of x0 under a single
    inverse map, every point at distance r >= r0 = rho / (L - L_tilde)
    from x0 must be pushed to distance at least L_tilde * r by every
    inverse map.  The inequality is evaluated on ``samples`` random
    points at radii spanning [r0, 4 r0] (or (0, 1] when rho = 0), in
    random directions, using a counter-based generator so the sample
    stream is reproducible.  Raises when the expansion precondition
    fails; Moebius expansion constants are window infima.
    """
    if not L_tilde > 1.0:
        raise ValueError("L_tilde must exceed 1")
    if x0.at_infinity:
        raise ValueError("x0 must be a finite point")
    L = min(inverse_expansivity(m, ifs.window) for m in ifs.maps)
    if L <= L_tilde:
        raise NotExpansiveError(
            f"weakest inverse map expands by {L:.6g}, "
            f"not above L_tilde = {L_tilde:.6g}"
        )
    rho = max(
        distance(ifs.space, apply_inverse(m, x0), x0) for m in ifs.maps
    )
    r0 = rho / (L - L_tilde)
    base = np.asarray(x0.coords, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=seed))
    failures = 0
    for _ in range(samples):
        u = 1.0 - rng.random()  # (0, 1]
        r = r0 * (1.0 + 3.0 * u) if r0 > 0.0 else u
        v = rng.normal(size=base.size)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            v[0], norm = 1.0, 1.0
        x = Point(tuple(base + (r / norm) * v))
        ok_here = all(
            distance(ifs.space, apply_inverse(m, x), x0)
            >= L_tilde * r * (1.0 - 1e-12)
            for m in ifs.maps
        )
        failures += not ok_here
    return ExpansivityResult(
        ok=failures == 0,
        L=L,
        L_tilde=float(L_tilde),
        rho=rho,
        r0=r0,
        samples=samples,
        failures=failures,
    )


# ---------------------------------------------------------------------------
# escape times


@dataclass(frozen=True)
class EscapeResult:
    """A sample whose constant-word reverse orbit lingers in a disk."""

    point: Point
    achieved: int
    n_target: int
    delta: float
    margin: float
    theta1: int


def _sample_points(ifs: IfsSystem, A: Union[SourceSet, Sequence[Point]]):
    if isinstance(A, (AttractorApprox, CellRaster)):
        src = _source_raster(A)
        xs, ys = src.grid.cell_centers()
        jj, ii = np.nonzero(src.occ)
        if ifs.space is Space.LINE1EXT:
            return [Point.line(float(xs[i])) for i in ii]
        return [
            Point.plane(float(xs[i]), float(ys[j])) for j, i in zip(jj, ii)
        ]
    return list(A)


def escape_time_demo(
    ifs: IfsSystem,
    A: Union[SourceSet, Sequence[Point]],
    theta1: int = 1,
    disk_center: Optional[Point] = None,
    disk_radius: Optional[float] = None,
    n_target: int = 1,
    max_steps: Optional[int] = None,
) -> EscapeResult:
    """Find an attractor sample whose reverse orbit lingers in a disk.

    Along the constant reverse word of map ``theta1``, a sample a within
    delta = d(a, w⁻¹(a)) of its own preimage drifts outward by at most a
    geometric sum, so delta < margin / (n · Lⁿ) guarantees roughly n
    reverse steps inside the disk (margin = radius − d(a, center), L =
    the weakest inverse expansion factor).  The demo scans samples in
    decreasing delta order, keeps the first whose stay time — verified
    by direct iteration, not by the bound — reaches ``n_target``, and
    returns both.  Repeating with growing targets exhibits unbounded
    stay times over the attractor.  The disk defaults to twice the
    sample spread around the fixed point of map ``theta1``.
    """
    if n_target < 0:
        raise ValueError("n_target must be >= 0")
    m = ifs.map(theta1)
    inv = invert(m)
    L = min(
        inverse_expansivity(mm, ifs.window, require_expansive=True)
        for mm in ifs.maps
    )
    pts = _sample_points(ifs, A)
    if not pts:
        raise EscapeSampleNotFoundError("the attractor sample set is empty")
    if disk_center is None:
        disk_center = fixed_point(m)
        if disk_center is None:
            raise ValueError(
                f"map {theta1} has no fixed point; pass disk_center"
            )
    spread = [distance(ifs.space, p, disk_center) for p in pts]
    if disk_radius is None:
        disk_radius = 2.0 * max(spread)
    elif max(spread) > disk_radius:
        raise ValueError("the disk must contain every attractor sample")
    cap = max_steps if max_steps is not None else max(64, 4 * n_target + 16)

    candidates = []
    for p, dc in zip(pts, spread):
        margin = disk_radius - dc
        if margin <= 0.0:
            continue
        delta = distance(ifs.space, apply(inv, p), p)
        if n_target == 0 or delta * n_target * L ** n_target < margin:
            candidates.append((delta, margin, p))
    candidates.sort(key=lambda t: -t[0])
    for delta, margin, p in candidates:
        y, stayed = p, 0
        while stayed < cap:
            y = apply(inv, y)
            if distance(ifs.space, y, disk_center) > disk_radius:
                break
            stayed += 1
        if stayed >= n_target:
            return EscapeResult(
                point=p,
                achieved=stayed,
                n_target=n_target,
                delta=delta,
                margin=margin,
                theta1=theta1,
            )
    raise EscapeSampleNotFoundError(
        f"no attractor sample sustains {n_target} reverse steps inside "
        "the disk; refine the sampling"
    )


# ---------------------------------------------------------------------------
# the bundled report


@dataclass(frozen=True)
class AnalysisReport:
    """Flat verification summary for one system at one resolution.

    Raster metrics are None where the system cannot be rasterized (the
    complex space) or the fast basin is undefined (partially invertible
    maps); ``to_text`` serializes every metric as one key=value line.
    """

    ifs_name: str
    nx: int
    K: int
    dim_attractor: Optional[float]
    dim_fast_basin: Optional[float]
    fit_residual_attractor: Optional[float]
    fit_residual_fast_basin: Optional[float]
    components_attractor: Optional[int]
    components_fast_basin: Optional[int]
    max_solid_square_attractor: Optional[int]
    max_solid_square_fast_basin: Optional[int]
    criterion_nontrivial: bool
    strict_indices: tuple[int, ...]
    per_map_hausdorff: tuple[float, ...]
    partial_maps: bool
    expansivity_ok: bool
    expansivity_r0: Optional[float]
    escape_times: tuple[tuple[int, int], ...]

    def to_text(self) -> str:
        def fmt(v) -> str:
            if v is None:
                return "none"
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return format(v, ".9g")
            return str(v)

        lines = [
            f"ifs={self.ifs_name}",
            f"nx={self.nx}",
            f"K={self.K}",
            f"dim_attractor={fmt(self.dim_attractor)}",
            f"dim_fast_basin={fmt(self.dim_fast_basin)}",
            f"fit_residual_attractor={fmt(self.fit_residual_attractor)}",
            f"fit_residual_fast_basin={fmt(self.fit_residual_fast_basin)}",
            f"components_attractor={fmt(self.components_attractor)}",
            f"components_fast_basin={fmt(self.components_fast_basin)}",
            "max_solid_square_attractor="
            + fmt(self.max_solid_square_attractor),
            "max_solid_square_fast_basin="
            + fmt(self.max_solid_square_fast_basin),
            f"criterion_nontrivial={fmt(self.criterion_nontrivial)}",
            "strict_indices="
            + (",".join(str(i) for i in self.strict_indices) or "none"),
            f"partial_maps={fmt(self.partial_maps)}",
            f"expansivity_ok={fmt(self.expansivity_ok)}",
            f"expansivity_r0={fmt(self.expansivity_r0)}",
        ]
        lines += [
            f"hausdorff_{i}={fmt(d)}"
            for i, d in enumerate(self.per_map_hausdorff, start=1)
        ]
        lines += [
            f"escape_achieved_{n}={t}" for n, t in self.escape_times
        ]
        return "\n".join(lines) + "\n"


def _try_expansivity(
    ifs: IfsSystem, L_tilde: float, seed: int
) -> tuple[bool, Optional[float]]:
    x0 = fixed_point(ifs.map(1))
    if x0 is None or x0.at_infinity:
        return False, None
    try:
        res = expansivity_check(ifs, x0, L_tilde, samples=2000, seed=seed)
    except FastbasinError:
        return False, None
    return res.ok, res.r0


def _try_escapes(
    ifs: IfsSystem,
    A: Union[SourceSet, Sequence[Point]],
    targets: Sequence[int],
) -> tuple[tuple[int, int], ...]:
    out = []
    for n in targets:
        try:
            res = escape_time_demo(ifs, A, n_target=n)
        except FastbasinError:
            break
        out.append((n, res.achieved))
    return tuple(out)


def analyze(
    ifs: IfsSystem,
    nx: int = 512,
    K: int = 4,
    L_tilde: float = 1.5,
    seed: int = 0,
    escape_targets: Sequence[int] = (1, 2, 3, 4, 5),
    cloud_points: int = 20_000,
) -> AnalysisReport:
    """Run every applicable verification for one system.

    Raster systems get attractor and fast-basin geometry (dimension,
    components, largest solid square) plus the criterion; the complex
    space falls back to a chaos-game point cloud for the criterion alone
    (tol = 5% of the cloud diameter).  Expansivity is probed around the
    fixed point of map 1 and reported as a plain boolean — systems whose
    weakest inverse does not expand beyond ``L_tilde`` report False.
    Escape times stop at the first unreachable target.
    """
    if ifs.space is Space.CPLANE2:
        cloud = chaos_game(ifs, cloud_points, seed=seed)
        pts = np.array([p.coords for p in cloud])
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
        crit = criterion_check(ifs, cloud, tol=0.05 * diam)
        exp_ok, exp_r0 = _try_expansivity(ifs, L_tilde, seed)
        return AnalysisReport(
            ifs_name=ifs.name,
            nx=nx,
            K=K,
            dim_attractor=None,
            dim_fast_basin=None,
            fit_residual_attractor=None,
            fit_residual_fast_basin=None,
            components_attractor=None,
            components_fast_basin=None,
            max_solid_square_attractor=None,
            max_solid_square_fast_basin=None,
            criterion_nontrivial=crit.nontrivial,
            strict_indices=crit.strict_indices,
            per_map_hausdorff=crit.per_map_hausdorff,
            partial_maps=crit.partial_maps,
            expansivity_ok=exp_ok,
            expansivity_r0=exp_r0,
            escape_times=_try_escapes(ifs, cloud, escape_targets),
        )

    A = compute_attractor(ifs, nx=nx)
    dim_a, res_a = box_dimension(A.raster)
    crit = criterion_check(ifs, A)
    try:
        B = fast_basin_inverse(ifs, A, K=K).as_raster()
        dim_b, res_b = box_dimension(B)
        comp_b = connected_components(B, 8)
        sq_b = max_solid_square(B)
    except PartialMapsUnsupportedError:
        dim_b = res_b = comp_b = sq_b = None
    exp_ok, exp_r0 = _try_expansivity(ifs, L_tilde, seed)
    return AnalysisReport(
        ifs_name=ifs.name,
        nx=nx,
        K=K,
        dim_attractor=dim_a,
        dim_fast_basin=dim_b,
        fit_residual_attractor=res_a,
        fit_residual_fast_basin=res_b,
        components_attractor=connected_components(A.raster, 8),
        components_fast_basin=comp_b,
        max_solid_square_attractor=max_solid_square(A.raster),
        max_solid_square_fast_basin=sq_b,
        criterion_nontrivial=crit.nontrivial,
        strict_indices=crit.strict_indices,
        per_map_hausdorff=crit.per_map_hausdorff,
        partial_maps=crit.partial_maps,
        expansivity_ok=exp_ok,
        expansivity_r0=exp_r0,
        escape_times=_try_escapes(ifs, A, escape_targets),
    )
