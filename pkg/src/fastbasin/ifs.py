"""Model spaces, invertible map families, words, and IFS config parsing.

An iterated function system here is a finite list of invertible maps on one
of four model spaces.  Map indices in words are 1-based throughout: the word
``(t1, ..., tk)`` denotes the composition that applies map ``tk`` first and
map ``t1`` last.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    ConfigError,
    NotExpansiveError,
    OutsideDomainError,
    OutsideImageError,
    PartialMapsUnsupportedError,
)

__all__ = [
    "Space",
    "Window",
    "Point",
    "Affine2",
    "Moebius1",
    "ComplexAffine2",
    "HalfSqrt",
    "MapSpec",
    "IfsSystem",
    "Word",
    "parse_ifs",
    "load_ifs",
    "apply",
    "apply_inverse",
    "apply_word",
    "apply_inverse_word",
    "compose",
    "invert",
    "fixed_point",
    "forward_lipschitz",
    "inverse_expansivity",
    "distance",
]

_STRIP_TOL = 1e-9
_HALF = 0.5


class Space(enum.Enum):
    """Model space an IFS acts on."""

    PLANE2 = "plane2"
    LINE1EXT = "line1ext"
    CPLANE2 = "cplane2"
    STRIP2 = "strip2"

    @property
    def dim(self) -> int:
        return {"plane2": 2, "line1ext": 1, "cplane2": 4, "strip2": 2}[self.value]


class Window(NamedTuple):
    """Axis-aligned box; for line1ext only the x-range is meaningful."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float


@dataclass(frozen=True)
class Point:
    """A point of a model space.

    ``coords`` holds 1, 2, or 4 real coordinates depending on the space
    (cplane2 points are stored as re/im pairs).  ``at_infinity`` is only
    meaningful on the extended line.  Coordinates may be ``Fraction`` values;
    the Moebius family then evaluates exactly.
    """

    coords: tuple
    at_infinity: bool = False

    @staticmethod
    def line(x) -> "Point":
        return Point((x,))

    @staticmethod
    def line_infinity() -> "Point":
        return Point((0.0,), at_infinity=True)

    @staticmethod
    def plane(x, y) -> "Point":
        return Point((x, y))

    @staticmethod
    def cplane(z: complex, w: complex) -> "Point":
        return Point((z.real, z.imag, w.real, w.imag))

    def as_complex_pair(self) -> tuple[complex, complex]:
        x0, x1, x2, x3 = self.coords
        return complex(x0, x1), complex(x2, x3)


@dataclass(frozen=True)
class Affine2:
    """(x, y) -> (a x + b y + tx, c x + d y + ty) on the plane."""

    a: float
    b: float
    c: float
    d: float
    tx: float
    ty: float

    space = Space.PLANE2

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)


@dataclass(frozen=True)
class Moebius1:
    """x -> (p x + q) / (r x + s) on the extended line."""

    p: float
    q: float
    r: float
    s: float

    space = Space.LINE1EXT

    @property
    def det(self) -> float:
        return self.p * self.s - self.q * self.r

    @property
    def pole(self) -> float | None:
        """Finite preimage of infinity, if any."""
        if self.r == 0.0:
            return None
        return -self.s / self.r

    def value_at_infinity(self):
        """Image of the point at infinity: p/r, or None for infinity itself."""
        if self.r == 0.0:
            return None
        return self.p / self.r


@dataclass(frozen=True)
class ComplexAffine2:
    """(z, w) -> (m11 z + t1, m21 z + m22 w + t2) on C^2."""

    m11: complex
    m21: complex
    m22: complex
    t1: complex
    t2: complex

    space = Space.CPLANE2

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, 0.0], [self.m21, self.m22]], dtype=complex)


@dataclass(frozen=True)
class HalfSqrt:
    """(x, y) -> (x/2 + tx, sqrt(y)) on the strip [0,1] x [1/2, inf).

    Total and contractive forward, but only partially invertible: the image
    is [tx, tx + 1/2] x [sqrt(1/2), inf).
    """

    tx: float

    space = Space.STRIP2


MapSpec = Union[Affine2, Moebius1, ComplexAffine2, HalfSqrt]

Word = tuple[int, ...]

_FAMILY_SPACE = {
    "affine2": Space.PLANE2,
    "moebius1": Space.LINE1EXT,
    "caffine2": Space.CPLANE2,
    "halfsqrt": Space.STRIP2,
}

_FAMILY_NARGS = {"affine2": 6, "moebius1": 4, "caffine2": 10, "halfsqrt": 1}


@dataclass(frozen=True)
class IfsSystem:
    """A named IFS: a model space and 1..64 invertible maps on it."""

    name: str
    space: Space
    maps: tuple[MapSpec, ...]
    window: Window | None = None

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def map(self, index: int) -> MapSpec:
        """Return the map with the given 1-based index."""
        if not 1 <= index <= len(self.maps):
            raise IndexError(f"map index {index} out of range 1..{len(self.maps)}")
        return self.maps[index - 1]

    @property
    def has_partial_maps(self) -> bool:
        return any(isinstance(m, HalfSqrt) for m in self.maps)


# ---------------------------------------------------------------------------
# config parsing


def parse_ifs(text: str, name: str = "ifs") -> IfsSystem:
    """Parse the plain-text IFS config format.

    One directive per line: ``space``, ``name``, ``window``, ``map``.
    ``#`` starts a comment.  The space defaults to plane2 and must be
    declared before any map line that needs a different one.
    """
    space: Space | None = None
    window: Window | None = None
    sys_name = name
    maps: list[MapSpec] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        directive = fields[0].lower()

        if directive == "space":
            if len(fields) != 2:
                raise ConfigError("space directive takes one argument", lineno)
            if maps:
                raise ConfigError("space directive must precede map lines", lineno)
            try:
                space = Space(fields[1].lower())
            except ValueError:
                raise ConfigError(f"unknown space {fields[1]!r}", lineno) from None
        elif directive == "name":
            if len(fields) < 2:
                raise ConfigError("name directive takes an argument", lineno)
            sys_name = " ".join(fields[1:])
        elif directive == "window":
            if len(fields) != 5:
                raise ConfigError("window directive takes four numbers", lineno)
            vals = _parse_floats(fields[1:], lineno)
            window = Window(*vals)
        elif directive == "map":
            if len(fields) < 2:
                raise ConfigError("map directive needs a family name", lineno)
            family = fields[1].lower()
            if family not in _FAMILY_SPACE:
                raise ConfigError(f"unknown map family {family!r}", lineno)
            want = _FAMILY_NARGS[family]
            args = _parse_floats(fields[2:], lineno)
            if len(args) != want:
                raise ConfigError(
                    f"map {family} takes {want} numbers, got {len(args)}", lineno
                )
            fam_space = _FAMILY_SPACE[family]
            if space is None:
                space = fam_space if family != "affine2" else Space.PLANE2
            if fam_space is not space:
                raise ConfigError(
                    f"map family {family} requires space {fam_space.value}, "
                    f"but system space is {space.value}",
                    lineno,
                )
            maps.append(_build_map(family, args, lineno))
        else:
            raise ConfigError(f"unknown directive {directive!r}", lineno)

    if not maps:
        raise ConfigError("config declares no maps")
    if len(maps) > 64:
        raise ConfigError(f"too many maps ({len(maps)} > 64)")
    if space is None:
        space = Space.PLANE2
    return IfsSystem(name=sys_name, space=space, maps=tuple(maps), window=window)


def load_ifs(path) -> IfsSystem:
    """Parse an IFS config file; the default name is the file stem."""
    import pathlib

    p = pathlib.Path(path)
    return parse_ifs(p.read_text(encoding="utf-8"), name=p.stem)


def _parse_floats(fields: list[str], lineno: int) -> list[float]:
    vals = []
    for f in fields:
        try:
            v = float(f)
        except ValueError:
            raise ConfigError(f"expected a number, got {f!r}", lineno) from None
        if not math.isfinite(v):
            raise ConfigError(f"non-finite number {f!r}", lineno)
        vals.append(v)
    return vals


def _build_map(family: str, args: list[float], lineno: int) -> MapSpec:
    if family == "affine2":
        m = Affine2(*args)
        if m.det == 0.0:
            raise ConfigError("affine2 map is singular (a d - b c = 0)", lineno)
        return m
    if family == "moebius1":
        mo = Moebius1(*args)
        if mo.det == 0.0:
            raise ConfigError("moebius1 map is singular (p s - q r = 0)", lineno)
        return mo
    if family == "caffine2":
        re11, im11, re21, im21, re22, im22, ret1, imt1, ret2, imt2 = args
        ca = ComplexAffine2(
            m11=complex(re11, im11),
            m21=complex(re21, im21),
            m22=complex(re22, im22),
            t1=complex(ret1, imt1),
            t2=complex(ret2, imt2),
        )
        if ca.m11 == 0 or ca.m22 == 0:
            raise ConfigError("caffine2 map is singular (m11 or m22 = 0)", lineno)
        return ca
    if family == "halfsqrt":
        tx = args[0]
        if tx not in (0.0, 0.5):
            raise ConfigError("halfsqrt tx must be 0 or 0.5", lineno)
        return HalfSqrt(tx)
    raise ConfigError(f"unknown map family {family!r}", lineno)


# ---------------------------------------------------------------------------
# applying maps


def _lift(m: Moebius1, x):
    """Return Moebius coefficients in the arithmetic of x (exact for Fraction)."""
    if isinstance(x, Fraction):
        return Fraction(m.p), Fraction(m.q), Fraction(m.r), Fraction(m.s)
    return m.p, m.q, m.r, m.s


def apply(m: MapSpec, x: Point) -> Point:
    """Apply a map forward to a point."""
    if isinstance(m, Affine2):
        px, py = x.coords
        return Point((m.a * px + m.b * py + m.tx, m.c * px + m.d * py + m.ty))
    if isinstance(m, Moebius1):
        p, q, r, s = _lift(m, x.coords[0])
        if x.at_infinity:
            if r == 0:
                return Point.line_infinity()
            return Point((p / r,))
        v = x.coords[0]
        den = r * v + s
        if den == 0:
            return Point.line_infinity()
        return Point(((p * v + q) / den,))
    if isinstance(m, ComplexAffine2):
        z, w = x.as_complex_pair()
        return Point.cplane(m.m11 * z + m.t1, m.m21 * z + m.m22 * w + m.t2)
    if isinstance(m, HalfSqrt):
        px, py = x.coords
        if not (-_STRIP_TOL <= px <= 1.0 + _STRIP_TOL) or py < _HALF - _STRIP_TOL:
            raise OutsideDomainError(
                f"point ({px}, {py}) is outside the strip [0,1] x [1/2, inf)"
            )
        return Point((px / 2.0 + m.tx, math.sqrt(py)))
    raise TypeError(f"unknown map type {type(m).__name__}")


def apply_inverse(m: MapSpec, y: Point) -> Point:
    """Apply the inverse of a map to a point."""
    if isinstance(m, Affine2):
        return apply(invert(m), y)
    if isinstance(m, Moebius1):
        return apply(invert(m), y)
    if isinstance(m, ComplexAffine2):
        z, w = y.as_complex_pair()
        zi = (z - m.t1) / m.m11
        wi = (w - m.t2 - m.m21 * zi) / m.m22
        return Point.cplane(zi, wi)
    if isinstance(m, HalfSqrt):
        u, v = y.coords
        lo, hi = m.tx, m.tx + _HALF
        if not (lo - _STRIP_TOL <= u <= hi + _STRIP_TOL):
            raise OutsideImageError(
                f"x-coordinate {u} outside image range [{lo}, {hi}]"
            )
        if v < math.sqrt(_HALF) - _STRIP_TOL:
            raise OutsideImageError(
                f"y-coordinate {v} below image range [sqrt(1/2), inf)"
            )
        return Point((2.0 * (u - m.tx), v * v))
    raise TypeError(f"unknown map type {type(m).__name__}")


def apply_word(ifs: IfsSystem, word: Word, x: Point) -> Point:
    """Apply the composition named by a word: the last index acts first.

    The empty word is the identity.
    """
    for idx in reversed(word):
        x = apply(ifs.map(idx), x)
    return x


def apply_inverse_word(ifs: IfsSystem, word: Word, y: Point) -> Point:
    """Apply inverses in word order with the last index acting first.

    ``apply_inverse_word(ifs, (t1, ..., tk), y)`` computes
    ``w_t1^-1(w_t2^-1(... w_tk^-1(y)))``.  Note this composition is the
    inverse of ``apply_word`` with the *reversed* word.
    """
    for idx in reversed(word):
        y = apply_inverse(ifs.map(idx), y)
    return y


# ---------------------------------------------------------------------------
# exact composition and inversion (families are closed under both)


def invert(m: MapSpec) -> MapSpec:
    """Return the inverse map as a spec of the same family.

    HalfSqrt is only partially invertible and has no total inverse spec.
    """
    if isinstance(m, Affine2):
        det = m.det
        ia, ib, ic, id_ = m.d / det, -m.b / det, -m.c / det, m.a / det
        return Affine2(
            ia, ib, ic, id_, -(ia * m.tx + ib * m.ty), -(ic * m.tx + id_ * m.ty)
        )
    if isinstance(m, Moebius1):
        return Moebius1(m.s, -m.q, -m.r, m.p)
    if isinstance(m, ComplexAffine2):
        i11 = 1.0 / m.m11
        i22 = 1.0 / m.m22
        i21 = -m.m21 / (m.m11 * m.m22)
        return ComplexAffine2(
            m11=i11,
            m21=i21,
            m22=i22,
            t1=-i11 * m.t1,
            t2=-(i21 * m.t1 + i22 * m.t2),
        )
    raise PartialMapsUnsupportedError(
        f"{type(m).__name__} has no total inverse spec"
    )


def compose(f: MapSpec, g: MapSpec) -> MapSpec:
    """Return the composition f o g (g acts first) within one family."""
    if isinstance(f, Affine2) and isinstance(g, Affine2):
        return Affine2(
            a=f.a * g.a + f.b * g.c,
            b=f.a * g.b + f.b * g.d,
            c=f.c * g.a + f.d * g.c,
            d=f.c * g.b + f.d * g.d,
            tx=f.a * g.tx + f.b * g.ty + f.tx,
            ty=f.c * g.tx + f.d * g.ty + f.ty,
        )
    if isinstance(f, Moebius1) and isinstance(g, Moebius1):
        return Moebius1(
            p=f.p * g.p + f.q * g.r,
            q=f.p * g.q + f.q * g.s,
            r=f.r * g.p + f.s * g.r,
            s=f.r * g.q + f.s * g.s,
        )
    if isinstance(f, ComplexAffine2) and isinstance(g, ComplexAffine2):
        return ComplexAffine2(
            m11=f.m11 * g.m11,
            m21=f.m21 * g.m11 + f.m22 * g.m21,
            m22=f.m22 * g.m22,
            t1=f.m11 * g.t1 + f.t1,
            t2=f.m21 * g.t1 + f.m22 * g.t2 + f.t2,
        )
    raise TypeError(
        f"cannot compose {type(f).__name__} with {type(g).__name__}"
    )


def fixed_point(m: MapSpec) -> Point | None:
    """Return a fixed point of the map, preferring an attracting one."""
    if isinstance(m, Affine2):
        lhs = np.eye(2) - m.matrix()
        if abs(np.linalg.det(lhs)) < 1e-14:
            return None
        x = np.linalg.solve(lhs, np.array([m.tx, m.ty]))
        return Point((float(x[0]), float(x[1])))
    if isinstance(m, Moebius1):
        if m.r == 0.0:
            if m.s == m.p:
                return None
            return Point((m.q / (m.s - m.p),))
        disc = (m.s - m.p) ** 2 + 4.0 * m.r * m.q
        if disc < 0.0:
            return None
        roots = [
            ((m.p - m.s) + sgn * math.sqrt(disc)) / (2.0 * m.r) for sgn in (1.0, -1.0)
        ]
        # prefer the attracting root
        for x in roots:
            den = (m.r * x + m.s) ** 2
            if den > 0.0 and abs(m.det) / den < 1.0:
                return Point((x,))
        return Point((roots[0],))
    if isinstance(m, ComplexAffine2):
        if m.m11 == 1 or m.m22 == 1:
            return None
        z = m.t1 / (1.0 - m.m11)
        w = (m.m21 * z + m.t2) / (1.0 - m.m22)
        return Point.cplane(z, w)
    if isinstance(m, HalfSqrt):
        return Point((2.0 * m.tx, 1.0))
    raise TypeError(f"unknown map type {type(m).__name__}")


# ---------------------------------------------------------------------------
# metric estimates


def distance(space: Space, x: Point, y: Point) -> float:
    """Euclidean distance; on the extended line infinity is at distance inf."""
    if space is Space.LINE1EXT:
        if x.at_infinity and y.at_infinity:
            return 0.0
        if x.at_infinity or y.at_infinity:
            return math.inf
    return math.sqrt(
        sum((float(a) - float(b)) ** 2 for a, b in zip(x.coords, y.coords))
    )


def forward_lipschitz(m: MapSpec, window: Window | None = None) -> float:
    """Upper Lipschitz bound of the forward map over a window.

    Affine families are global; Moebius and HalfSqrt bounds use the window
    (required for Moebius).
    """
    if isinstance(m, Affine2):
        return float(np.linalg.svd(m.matrix(), compute_uv=False)[0])
    if isinstance(m, ComplexAffine2):
        return float(np.linalg.svd(m.matrix(), compute_uv=False)[0])
    if isinstance(m, Moebius1):
        if window is None:
            raise ValueError("moebius1 Lipschitz bound needs a window")
        a, b = window.xmin, window.xmax
        pole = m.pole
        if pole is not None and a <= pole <= b:
            return math.inf
        da, db = (m.r * a + m.s) ** 2, (m.r * b + m.s) ** 2
        return abs(m.det) / min(da, db)
    if isinstance(m, HalfSqrt):
        ymin = _HALF if window is None else max(window.ymin, _HALF)
        return max(_HALF, 1.0 / (2.0 * math.sqrt(ymin)))
    raise TypeError(f"unknown map type {type(m).__name__}")


def inverse_expansivity(
    m: MapSpec, region: Window | None = None, require_expansive: bool = False
) -> float:
    """Largest L with d(w^-1(y1), w^-1(y2)) >= L d(y1, y2) on the region.

    For affine families this is the reciprocal of the largest singular value
    and the region is ignored.  For Moebius maps the bound is the infimum of
    |(w^-1)'| over the region x-range (required); the region should not
    contain the inverse's pole.  Raises NotExpansiveError when expansivity
    was required but L <= 1.
    """
    if isinstance(m, (Affine2, ComplexAffine2)):
        L = 1.0 / float(np.linalg.svd(m.matrix(), compute_uv=False)[0])
    elif isinstance(m, Moebius1):
        if region is None:
            raise ValueError("moebius1 expansivity bound needs a region")
        a, b = region.xmin, region.xmax
        # w^-1(y) = (s y - q) / (-r y + p); |(w^-1)'(y)| = |det| / (p - r y)^2.
        # The infimum over [a, b] sits at an endpoint even when the inverse's
        # pole p/r lies inside (the derivative only grows near the pole).
        da, db = (m.p - m.r * a) ** 2, (m.p - m.r * b) ** 2
        L = abs(m.det) / max(da, db)
    elif isinstance(m, HalfSqrt):
        vmin = math.sqrt(_HALF) if region is None else max(region.ymin, math.sqrt(_HALF))
        L = min(2.0, 2.0 * vmin)
    else:
        raise TypeError(f"unknown map type {type(m).__name__}")
    if require_expansive and L <= 1.0:
        raise NotExpansiveError(f"inverse map expands by only {L:.6g} <= 1")
    return L
