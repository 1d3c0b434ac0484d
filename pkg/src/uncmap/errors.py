"""Exception types shared across the package."""


class UncmapError(Exception):
    """Base class for all package errors."""


class OutOfBounds(UncmapError):
    """A world point or cell index falls outside the grid extent."""

    def __init__(self, point):
        self.point = tuple(point)
        super().__init__(f"point {self.point} outside grid extent")


class DegenerateGrid(UncmapError):
    """Grid too small for the requested stencil."""


class MalformedFile(UncmapError):
    """Layer file header, value count, or checksum is inconsistent."""


class InvalidCovariance(UncmapError):
    """Covariance matrix is not symmetric positive-definite."""


class DegenerateBelief(UncmapError):
    """Propagated or supplied belief has a singular covariance."""


class BoundDomainViolation(UncmapError):
    """Rectangle sides violate the bound domain 0 < s_i <= 4*sigma_i/sqrt(3)."""

    def __init__(self, axes):
        self.axes = list(axes)
        super().__init__(f"bound domain violated on axes {self.axes}")


class DomainError(UncmapError):
    """Scalar argument outside its mathematical domain."""


class GeometryMismatch(UncmapError):
    """Two layers that must share a GridGeometry do not."""


class NoPathFound(UncmapError):
    """Planner exhausted its iteration budget without reaching the goal."""
