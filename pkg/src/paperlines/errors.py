"""Exception types shared across the toolkit."""


class PaperlinesError(Exception):
    """Base class for all toolkit errors."""


class OutOfBounds(PaperlinesError):
    """A rectangle or position falls outside the image."""


class InvalidThreshold(PaperlinesError):
    """Edge detection thresholds are inconsistent (low > high)."""


class InsufficientTicks(PaperlinesError):
    """Fewer than two ruler tick lines were found."""


class EdgesNotFound(PaperlinesError):
    """Paper edges could not be located in the edge mask."""


class TooFewFrames(PaperlinesError):
    """A scale-space stack has too few frames for the requested operation."""


class InvalidInterval(PaperlinesError):
    """A scale interval is empty, reversed, or outside the computed range."""


class NoLinesFound(PaperlinesError):
    """Detection produced an empty peak set."""


class PatchTooSmall(PaperlinesError):
    """The patch does not span the minimum physical extent (1 cm)."""


class PositionOutOfBounds(PaperlinesError):
    """A report references a position outside the target image."""


class InvalidSpec(PaperlinesError):
    """A phantom specification is inconsistent (e.g. element off canvas)."""


class UnsupportedFormat(PaperlinesError):
    """An image file is not one of the supported formats."""
