"""Exception types raised across the pipeline."""


class MdnError(Exception):
    """Base class for all pipeline errors."""


class DimensionMismatchError(MdnError):
    """Image/mask or raster/grid dimensions do not agree."""


class ValueOutOfRangeError(MdnError):
    """A pixel or field value violates its allowed range."""


class InvalidConfigError(MdnError):
    """A configuration value or combination is invalid."""


class ParticleTooSmallError(MdnError):
    """A particle would render below one pixel at the current scale."""


class DegenerateSplitError(MdnError):
    """A train/test split would leave one side empty."""


class IoFailureError(MdnError):
    """A file could not be read or written, or is corrupt."""


class AlreadyNormalizedError(MdnError):
    """normalize() was called on an already-normalized image."""


class GridMismatchError(MdnError):
    """Raster dimensions do not match the patch grid's padded dimensions."""


class PatchCountMismatchError(MdnError):
    """Number of patches does not match the grid's rows x cols."""


class ShapeMismatchError(MdnError):
    """Tensor shapes are incompatible with the model or each other."""


class EmptySplitError(MdnError):
    """The requested dataset split contains no entries."""


class VersionMismatchError(MdnError):
    """Checkpoint format version is not supported."""


class ConfigMismatchError(MdnError):
    """Checkpoint model config does not match the expected config."""


class InvalidBinsError(MdnError):
    """Size-histogram bin edges are not strictly increasing."""
