"""Attractors, fast basins, continuations, and basin estimates of invertible
iterated function systems, on windowed cell rasters."""

from .errors import (
    ConfigError,
    DegenerateScaleRangeError,
    DidNotStabilizeError,
    EscapeSampleNotFoundError,
    FastbasinError,
    InvalidRadiusError,
    NotContractiveError,
    NotExpansiveError,
    OutsideDomainError,
    OutsideImageError,
    PartialMapsUnsupportedError,
    UnsupportedSpaceError,
)
from .ifs import (
    Affine2,
    ComplexAffine2,
    HalfSqrt,
    IfsSystem,
    Moebius1,
    Point,
    Space,
    Window,
    apply,
    apply_inverse,
    apply_inverse_word,
    apply_word,
    compose,
    distance,
    fixed_point,
    forward_lipschitz,
    inverse_expansivity,
    invert,
    load_ifs,
    parse_ifs,
)
from .raster import CellRaster, Grid, hausdorff_distance, transport
from .attractor import (
    AttractorApprox,
    chaos_game,
    compute_attractor,
    gasket_member,
    grid_for,
    hutchinson,
)
from .basin import (
    UNSET,
    ContinuationApprox,
    GenerationField,
    RasterDistanceOracle,
    basin_estimate,
    continuation,
    fast_basin_inverse,
    generation_forward,
    generation_grid,
    slow_basin,
)
from .analysis import (
    AnalysisReport,
    CriterionResult,
    EscapeResult,
    ExpansivityResult,
    analyze,
    box_dimension,
    connected_components,
    criterion_check,
    escape_time_demo,
    expansivity_check,
    max_solid_square,
)
from .render import DEFAULT_PALETTE, Palette, colorize, write_ppm

__version__ = "0.1.0"
