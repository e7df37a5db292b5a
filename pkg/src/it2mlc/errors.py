"""Exception types raised across the package."""


class It2Error(Exception):
    """Base class for all package errors."""


class ShapeError(It2Error, ValueError):
    pass


class InputError(It2Error, ValueError):
    pass


class StateError(It2Error, RuntimeError):
    pass


class NumericError(It2Error, ArithmeticError):
    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class ParseError(It2Error, ValueError):
    """Malformed input file. ``line`` is 1-based, or None when not line-specific."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
        if line is not None:
            loc = f"{loc}:{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
