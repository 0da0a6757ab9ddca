"""Exception hierarchy shared by every pipeline stage."""


class RainstackError(Exception):
    """Base class for all errors raised by this package."""


class ImageFormatError(RainstackError):
    """Raised when a file cannot be decoded as a supported raster."""


class DimensionMismatchError(RainstackError, ValueError):
    """Raised when images that must share a shape do not."""


class EmptyStackError(RainstackError, ValueError):
    pass


class FrameCountMismatchError(RainstackError, ValueError):
    pass


class DatasetLayoutError(RainstackError):
    """Raised when a scene or library directory is missing required files."""


class DegenerateSampleError(RainstackError):
    """Raised when no valid regression sample can be drawn from an image."""


class DegenerateFitError(RainstackError):
    """Raised when the least-squares denominator vanishes for a channel."""

    def __init__(self, channel, denominator):
        self.channel = channel
        self.denominator = denominator
        super().__init__(
            f"degenerate fit in channel {channel}: "
            f"observed values have (near) zero spread (denominator={denominator:.3e})"
        )


class InfeasibleSpecError(RainstackError, ValueError):
    """Raised when a synthetic scene spec cannot satisfy the strike-majority constraint."""
