"""Exception hierarchy shared by every faithkit module."""


class FaithkitError(Exception):
    """Base class for all toolkit errors."""


class NumericInputError(FaithkitError, ValueError):
    """Non-finite parameters or inputs, or a numerically unsolvable system."""


class DegenerateDataError(FaithkitError, ValueError):
    """Training data that cannot define a binary classifier."""


class ParseError(FaithkitError, ValueError):
    """Malformed text input (dataset, checkpoint, config, lexicon)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelError(ParseError):
    """A label outside {0, 1}."""


class DimensionError(FaithkitError, ValueError):
    """Shapes that disagree with each other or with a declared size."""


class VersionError(ParseError):
    """Checkpoint written by an unknown format version."""


class EmptyInputError(FaithkitError, ValueError):
    """Text that tokenizes to nothing."""


class UndefinedStatisticError(FaithkitError, ValueError):
    """A statistic requested on too few or constant observations."""
