"""Exception types shared across the package."""


class PctError(ValueError):
    """Base class for all package-specific errors."""


class InvalidDepthError(PctError):
    """Depth value is non-positive or non-finite."""


class BehindCameraError(PctError):
    """3D point has z <= 0 and cannot be projected."""


class DegenerateRoiError(PctError):
    """RoI has zero or negative area."""


class DegenerateBoxError(PctError):
    """Box footprint or volume is degenerate."""


class EmptyPatchError(PctError):
    """Coordinate patch has no valid cells."""


class ParseError(PctError):
    """Malformed text input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(PctError):
    """Malformed binary payload (bad magic, truncation, bad sizes)."""


class ShapeError(PctError):
    """Tensor shape incompatible with a layer or operation."""


class StateError(PctError):
    """Operation called out of order (e.g. backward before forward)."""


class SceneGenerationError(PctError):
    """Rejection sampling failed to produce a valid scene."""
