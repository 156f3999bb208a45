"""
Exception types raised across glmotion.

Every error derives from `GlMotionError` so callers (the CLI in particular)
can map whole families of failures onto exit codes.
"""


class GlMotionError(Exception):
    """Base class of all glmotion errors."""


class ShapeError(GlMotionError, ValueError):
    """Tensor shapes do not satisfy an operation's contract."""


class NumericError(GlMotionError, ArithmeticError):
    """A computation produced or would produce a non-finite value."""


class MaskError(GlMotionError, ValueError):
    """A mask leaves nothing valid to normalise or average over."""


class StateError(GlMotionError, RuntimeError):
    """An object is used in a state that does not allow the call."""


class DeterminismError(GlMotionError, RuntimeError):
    """A function expected to be deterministic returned differing values."""


class LengthError(GlMotionError, ValueError):
    """A sequence length is outside its allowed range."""


class ParseError(GlMotionError, ValueError):
    """
    Input text could not be parsed.

    Args:
        message (str): Human readable reason.
        line (int, optional): 1-based line number of the offending token.
        path (str, optional): Location inside a structured document, e.g. ``coords.3``.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ''
        if line is not None:
            where = f' (line {line})'
        elif path is not None:
            where = f' (at {path})'
        super().__init__(f'{message}{where}')


class FormatError(GlMotionError, ValueError):
    """Input parsed but violates a structural invariant."""


class DataError(GlMotionError, ValueError):
    """A dataset cannot be used for the requested run."""


class ConfigError(GlMotionError, ValueError):
    """A configuration key or value is invalid."""


class UsageError(GlMotionError):
    """Command-line usage error."""
