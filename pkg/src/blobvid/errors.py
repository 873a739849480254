"""Exception types shared across the package."""


class BlobvidError(Exception):
    """Base class for every error raised by this library."""


class InvalidBlob(BlobvidError, ValueError):
    """Blob parameters violate their contract (non-positive radius, non-finite value)."""


class ShapeError(BlobvidError, ValueError):
    """Array or grid shapes are inconsistent."""


class EmptyMask(BlobvidError, ValueError):
    """A binary mask with no set cells was given where content is required."""


class EmptyTrack(BlobvidError, ValueError):
    """A track has no annotated frames."""


class RangeError(BlobvidError, ValueError):
    """A scalar argument is outside its documented range."""


class TooLarge(BlobvidError, ValueError):
    """A requested dense materialization exceeds the configured cap."""


class DegenerateVector(BlobvidError, ValueError):
    """A vector with zero norm reached an operation that needs a direction."""


class EmptyPrompt(BlobvidError, ValueError):
    """An empty prompt string was given."""


class UndefinedMetric(BlobvidError, ValueError):
    """The metric has no defined value on the given inputs (nothing to average)."""


class SchemaError(BlobvidError, ValueError):
    """A document parsed as JSON but does not match the expected structure."""


class ParseError(BlobvidError, ValueError):
    """Input text is not valid JSON. Carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int | None = None,
                 line: int | None = None, column: int | None = None):
        detail = message
        if byte_offset is not None:
            detail = f"{message} (byte offset {byte_offset})"
        super().__init__(detail)
        self.byte_offset = byte_offset
        self.line = line
        self.column = column
