"""Exception hierarchy for the sheetgrade library."""


class SheetgradeError(Exception):
    """Base class for all sheetgrade errors."""


class DimensionError(SheetgradeError):
    """Raster dimensions are invalid or inconsistent for the operation."""


class ParseError(SheetgradeError):
    """A file (template, manifest, PGM, config) is malformed."""


class DetectionError(SheetgradeError):
    """Corner/vertex detection failed."""


class InsufficientCorners(DetectionError):
    """Fewer than four usable corner peaks were found."""


class DegenerateQuad(DetectionError):
    """The selected four corners do not form a usable quadrilateral."""


class GeometryError(SheetgradeError):
    """A geometric computation cannot proceed."""


class SingularHomography(GeometryError):
    """The four-point system is singular, no perspective map exists."""


class TemplateError(SheetgradeError):
    """A template is internally inconsistent."""


class AreaOutOfBounds(TemplateError):
    """An expanded answer area pokes outside the canonical sheet."""


class GradingError(SheetgradeError):
    """A grading computation is ill-defined."""


class EmptyLabel(GradingError):
    """A located area has an empty label, the accuracy denominator is 0."""


class GenerationError(SheetgradeError):
    """A synthetic sheet layout cannot be realized."""
