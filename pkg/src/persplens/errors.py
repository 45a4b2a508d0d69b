"""Exception types shared across the package."""


class PersplensError(Exception):
    """Base class for all persplens errors."""


class NonPositiveDepthError(PersplensError):
    """A 3-D point at or behind the camera plane cannot be projected."""


class BadCountError(PersplensError):
    """A count parameter is below its minimum."""


class BadStepError(PersplensError):
    """A step size is not strictly positive."""


class BadChannelsError(PersplensError):
    """Image channel count is not 1 or 3."""


class ImageTooSmallError(PersplensError):
    """Image is smaller than the 3x3 derivative stencil."""


class OutOfBoundsError(PersplensError):
    """Sample position lies outside the image rectangle."""


class DimensionMismatchError(PersplensError):
    """Two rasters that must agree in size do not."""


class EmptyVPSetError(PersplensError):
    """The loss needs at least one vanishing point."""


class NumericalRangeError(PersplensError):
    """A vanishing point is too far away for well-conditioned ray parameters."""


class DegeneratePencilError(PersplensError):
    """All lines of a pencil are parallel; no finite intersection exists."""


class TooFewSegmentsError(PersplensError):
    """A line family needs at least two segments."""


class ParseError(PersplensError):
    """A JSON document is malformed or missing required fields."""


class SchemaVersionError(PersplensError):
    """A JSON document declares an unsupported schema version."""


class AllInfiniteError(PersplensError):
    """Every line family of a scene is parallel to the sensor."""


class SizeTooLargeError(PersplensError):
    """Requested size exceeds the finite-differencing cost guard."""
