"""Exception hierarchy shared by the library and the CLI."""


class TorLabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(TorLabError, ValueError):
    """An argument is outside the domain an operation accepts."""

    exit_code = 2


class ConfigError(DomainError):
    """Invalid or unsupported training configuration."""

    exit_code = 2


class ParseError(TorLabError, ValueError):
    """Malformed input file."""

    exit_code = 3

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolverError(TorLabError, RuntimeError):
    """A solver could not produce a usable solution."""

    exit_code = 4
