"""Exception types shared across the package."""


class SemplausError(Exception):
    """Base class for all package errors."""


class ParseError(SemplausError):
    """A data file could not be parsed.

    Carries the offending path and 1-based line number when known, so CLI
    output can point at the exact row.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(SemplausError):
    """Inputs violate a documented precondition or invariant."""


class DivergenceError(SemplausError):
    """Training produced non-finite losses or gradients."""
