"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "FastbasinError",
    "ConfigError",
    "OutsideDomainError",
    "OutsideImageError",
    "UnsupportedSpaceError",
    "NotContractiveError",
    "NotExpansiveError",
    "DidNotStabilizeError",
    "PartialMapsUnsupportedError",
    "InvalidRadiusError",
    "DegenerateScaleRangeError",
    "EscapeSampleNotFoundError",
]


class FastbasinError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FastbasinError):
    """Malformed IFS config text (syntax, singular map, mixed spaces)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OutsideDomainError(FastbasinError):
    """A partial map was applied to a point outside its domain."""


class OutsideImageError(FastbasinError):
    """A partial map was inverted at a point outside its image."""


class UnsupportedSpaceError(FastbasinError):
    """The operation does not support the system's model space."""


class NotContractiveError(FastbasinError):
    """Forward maps are not contractive where contraction is required."""


class NotExpansiveError(FastbasinError):
    """Inverse maps are not expansive where expansivity is required."""


class DidNotStabilizeError(FastbasinError):
    """An iterative refinement hit its iteration cap before stabilizing."""


class PartialMapsUnsupportedError(FastbasinError):
    """The operation requires total invertible maps."""


class InvalidRadiusError(FastbasinError):
    """A neighborhood radius parameter was not strictly positive."""


class DegenerateScaleRangeError(FastbasinError):
    """Too few dyadic scales for a log-log dimension fit."""


class EscapeSampleNotFoundError(FastbasinError):
    """No sampled attractor point satisfied the escape-time bound."""
