"""Exception types raised across the package."""


class ExploreBenchError(Exception):
    """Base class for all package errors."""


class OutOfBounds(ExploreBenchError, IndexError):
    pass


class ParseError(ExploreBenchError, ValueError):
    pass


class DimensionMismatch(ExploreBenchError, ValueError):
    pass


class ConsistencyError(ExploreBenchError, ValueError):
    pass


class InfeasibleSpec(ExploreBenchError, ValueError):
    """Raised when a generation request cannot be satisfied.

    ``index`` is set by batch generation to the position of the failing spec.
    """

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"[{index}] {message}")
        self.index = index


class UnknownName(ExploreBenchError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InvalidPose(ExploreBenchError, ValueError):
    pass


class InvalidStart(ExploreBenchError, ValueError):
    pass


class NoPath(ExploreBenchError):
    pass


class NoFrontier(ExploreBenchError):
    pass


class StrategyError(ExploreBenchError):
    pass


class InvalidRatio(ExploreBenchError, ValueError):
    pass


class EmptyInput(ExploreBenchError, ValueError):
    pass


class InvalidInput(ExploreBenchError, ValueError):
    pass


class MalformedLog(ExploreBenchError, ValueError):
    pass


class NotReset(ExploreBenchError, RuntimeError):
    pass
