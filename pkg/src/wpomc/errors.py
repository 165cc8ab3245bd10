"""Exception types shared across the tool."""


class WpomcError(Exception):
    """Base class for all tool errors."""


class ParseError(WpomcError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, col {column}: {message}"
        super().__init__(message)


class UnsupportedConstructError(ParseError):
    pass


class SsaError(WpomcError):
    pass


class EncodingError(WpomcError):
    pass


class SolverNotFoundError(WpomcError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"solver executable not found: {path!r}")


class SolverTimeoutError(WpomcError):
    def __init__(self, seconds):
        self.seconds = seconds
        super().__init__(f"solver timed out after {seconds} s")


class SolverOutputError(WpomcError):
    pass


class WitnessError(WpomcError):
    pass


class EnumerationCapError(WpomcError):
    """Raised when the oracle would have to truncate its enumeration.

    A truncated oracle is worse than none, so the cap is a hard error.
    """
