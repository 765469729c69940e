"""Exception hierarchy shared by the solver, I/O and CLI layers."""


class SCSCError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(SCSCError, ValueError):
    """Array shapes are empty, inconsistent, or too small for the filter."""


class InvalidParameterError(SCSCError, ValueError):
    """A scalar or mask parameter is outside its admissible range."""


class NumericalError(SCSCError, ArithmeticError):
    """An iterate became non-finite or a bracketing search failed."""


class DegenerateLabelsError(SCSCError, ValueError):
    """A label field lacks one of the two classes."""


class FormatError(SCSCError, ValueError):
    """A file could not be parsed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class InvalidLabelError(FormatError):
    """A label image contains a value outside {0, 128, 255}."""
