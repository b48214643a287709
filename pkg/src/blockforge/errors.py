"""Exception hierarchy shared across the package.

The service layer maps these onto HTTP statuses: UnknownIdError -> 404,
StateError -> 409, everything else derived from BlockforgeError -> 422.
"""


class BlockforgeError(Exception):
    """Base class for all domain errors."""


class DimensionError(BlockforgeError):
    """Raster/grid dimensions are inconsistent or too small."""


class PaletteError(BlockforgeError):
    """Class id outside the palette, or palettes do not match."""


class CodecError(BlockforgeError):
    """Label-map bytes are not a valid single-channel 8-bit image."""


class GeometryError(BlockforgeError):
    """Degenerate polygon or other invalid geometry."""


class EmptyEvaluationError(BlockforgeError):
    """A metric has nothing to evaluate (no non-void pixels, no segments)."""


class NoQualifyingRegionsError(BlockforgeError):
    """No ground-truth component falls below the small-region threshold."""


class NoFeasibleGridError(BlockforgeError):
    """No block grid reaches the minimum segments-per-block comfort range."""


class SupportViolationError(BlockforgeError):
    """Partial label map carries labels outside the selected blocks."""


class PredictorError(BlockforgeError):
    """A predictor returned an invalid probability field."""


class UnknownIdError(BlockforgeError):
    """Referenced task / worker / image / dataset does not exist."""


class StateError(BlockforgeError):
    """Operation violates the task state machine."""
