"""Exception hierarchy shared across the package."""


class LearntraceError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(LearntraceError):
    """Operand shapes are incompatible with an operation's contract."""


class GraphError(LearntraceError):
    """A graph-level contract was violated (e.g. backward from a non-scalar)."""


class NumericError(LearntraceError):
    """A non-finite value appeared where the contract requires finite values."""


class ConfigError(LearntraceError):
    """An invalid model or run configuration was requested."""


class IngestionError(LearntraceError):
    """A manifest, session log, or image file failed to load or validate."""
