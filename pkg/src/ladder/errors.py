"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class LadderError(Exception):
    """Base class for all engine errors."""


class GeometryError(LadderError):
    """Non-finite or non-canonical box input."""


class ImageError(LadderError):
    """Image file missing, unreadable, or with invalid dimensions."""


class SidecarParseError(LadderError):
    """Sidecar JSON is malformed; carries the character offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class DimensionMismatchError(LadderError):
    """Sidecar-recorded image dimensions disagree with the actual image."""


class ValidationError(LadderError):
    """Invariant violation; carries offending shape ids when applicable."""

    def __init__(self, message: str, shape_ids: list[str] | None = None):
        super().__init__(message)
        self.shape_ids = shape_ids or []


class ShapeNotFoundError(LadderError):
    """Edit targets a shape id not present in the document."""


class NotFoundError(LadderError):
    """Project, image, or model version lookup failed."""


class MappingError(LadderError):
    """Class index or label cannot be resolved against the class map."""


class ConflictError(LadderError):
    """Optimistic-concurrency commit lost the race; carries the latest document."""

    def __init__(self, message: str, doc=None, token: str | None = None):
        super().__init__(message)
        self.doc = doc
        self.token = token


class PreconditionError(LadderError):
    """Operation not valid in the current registry state."""


class BridgeError(LadderError):
    """Bridge subprocess failed; carries exit code and captured diagnostics."""

    def __init__(self, message: str, exit_code: int | None = None, stderr: str = ""):
        super().__init__(message)
        self.exit_code = exit_code
        self.stderr = stderr


class IncompatibleWeightsError(BridgeError):
    """Bridge refused the weight artifact."""


class UndefinedRecallError(LadderError):
    """PR curve requested for a class with zero ground-truth instances."""
