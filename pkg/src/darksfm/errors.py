"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class DarkSfmError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(DarkSfmError, ValueError):
    """Image dimensions violate an operation's divisibility requirements."""


class UnsupportedFormatError(DarkSfmError, ValueError):
    """Unknown CFA pattern or unrecognized file layout."""


class ShapeMismatchError(DarkSfmError, ValueError):
    """Arrays that must conform do not."""


class InsufficientDataError(DarkSfmError, ValueError):
    """Too few samples, matches, or common frames to proceed."""


class UnreachableSnrError(DarkSfmError, ValueError):
    """Requested SNR target lies outside the attainable range.

    Attributes
    ----------
    attainable : tuple of float
        (lowest, highest) SNR in dB reachable by any positive scale.
    """

    def __init__(self, message: str, attainable: tuple[float, float]):
        super().__init__(message)
        self.attainable = attainable


class DegenerateGeometryError(DarkSfmError, RuntimeError):
    """Geometric configuration admits no unique solution."""


class AmbiguousPoseError(DegenerateGeometryError):
    """Cheirality cannot disambiguate the pose decompositions."""


class LowParallaxError(DegenerateGeometryError):
    """Viewing rays are (nearly) parallel; triangulation is ill-posed."""


class DisconnectedGraphError(DarkSfmError, RuntimeError):
    """Scene graph fell apart after dropping unusable edges.

    Attributes
    ----------
    components : list of list of int
        Node indices of each connected component, largest first.
    """

    def __init__(self, message: str, components: list[list[int]] | None = None):
        super().__init__(message)
        self.components = components or []


class NumericalError(DarkSfmError, RuntimeError):
    """Non-finite value encountered; message names the offending term."""


class FileFormatError(DarkSfmError, ValueError):
    """File contents do not match the declared format."""
