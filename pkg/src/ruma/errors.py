"""Exception types shared across the package."""


class RumaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RumaError):
    """Invalid arena configuration value or violated config invariant."""


class CapacityError(RumaError):
    """The arena cannot satisfy an allocation request."""


class HandleError(RumaError):
    """Operation referenced an unknown, freed, or consumed allocation."""


class AccessError(RumaError):
    """Read or write outside an allocation, or arena has no backing memory."""


class TraceError(RumaError):
    """Malformed or referentially invalid trace input."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class BenchError(RumaError):
    """Benchmark parameters cannot be planned or executed."""
