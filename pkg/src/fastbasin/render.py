"""Colorize generation fields and write binary PPM images.

The palette mirrors the band scheme of the bundled examples: the
attractor is drawn in its own color, each later generation in the next
band color, cells never reached stay on the background.  Images are
plain binary PPM (P6) so the bytes are easy to pin in tests and free of
compression nondeterminism.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .basin import UNSET, GenerationField

RGB = Tuple[int, int, int]


def _check_rgb(name: str, c: RGB) -> None:
    if len(c) != 3 or any(not (0 <= int(v) <= 255) for v in c):
        raise ValueError(f"{name} must be three channel values in 0..255")


@dataclass(frozen=True)
class Palette:
    """Band colors for a generation field.

    ``attractor`` paints generation 0, ``colors[k-1]`` paints generation
    k, generations beyond the list take ``overflow`` (or are rejected if
    it is unset), and cells never reached take ``background``.
    """

    background: RGB = (255, 255, 255)
    attractor: RGB = (255, 0, 0)
    colors: Tuple[RGB, ...] = (
        (120, 180, 255),  # light blue
        (0, 0, 160),  # dark blue
        (0, 160, 0),  # green
        (0, 0, 0),  # black
    )
    overflow: Optional[RGB] = (96, 96, 96)

    def __post_init__(self) -> None:
        _check_rgb("background", self.background)
        _check_rgb("attractor", self.attractor)
        for i, c in enumerate(self.colors, start=1):
            _check_rgb(f"generation color {i}", c)
        if self.overflow is not None:
            _check_rgb("overflow", self.overflow)
        if tuple(self.attractor) == tuple(self.background):
            raise ValueError(
                "the attractor color must differ from the background"
            )


DEFAULT_PALETTE = Palette()


def colorize(
    field: GenerationField, palette: Palette = DEFAULT_PALETTE
) -> np.ndarray:
    """Render a generation field to an (ny, nx, 3) uint8 image.

    Pixel rows run top to bottom while grid rows run bottom to top, so
    the raster is flipped: the top image row shows the cells of largest
    y.  Pure function of its inputs — colors come from the palette
    lookup table alone.
    """
    deepest = int(field.K)
    if deepest > len(palette.colors) and palette.overflow is None:
        raise ValueError(
            f"palette has {len(palette.colors)} generation colors but the "
            f"field reaches generation {deepest} and no overflow is set"
        )
    lut = np.empty((256, 3), dtype=np.uint8)
    lut[:] = palette.overflow if palette.overflow is not None else (0, 0, 0)
    lut[0] = palette.attractor
    for k, c in enumerate(palette.colors, start=1):
        if k < UNSET:
            lut[k] = c
    lut[UNSET] = palette.background
    return lut[field.gen[::-1]]


def write_ppm(image: np.ndarray, path: str) -> None:
    """Write an (ny, nx, 3) uint8 image as binary PPM (P6, maxval 255)."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(
            f"expected an (ny, nx, 3) uint8 image, got shape "
            f"{img.shape} dtype {img.dtype}"
        )
    ny, nx = img.shape[:2]
    header = f"P6\n{nx} {ny}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.tobytes())
