"""Exception types shared across the package.

Each class carries the process exit code the CLI uses when it surfaces.
"""


class PsmGpError(Exception):
    exit_code = 1


class ValidationError(PsmGpError, ValueError):
    """Invalid input values or configuration."""

    exit_code = 5


class ParseError(PsmGpError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 4

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class UndefinedFitnessError(PsmGpError, ValueError):
    """Relative squared error is undefined because all targets are equal."""

    exit_code = 6
