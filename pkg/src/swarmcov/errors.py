"""Exception types raised across the package."""


class SwarmCovError(Exception):
    """Base class for all package errors."""


class PolygonError(SwarmCovError, ValueError):
    """Invalid polygon (too few vertices, repeated vertices, self-intersection)."""


class NoVisitableCells(SwarmCovError, ValueError):
    pass


class EpisodeFinished(SwarmCovError, RuntimeError):
    pass


class DimensionMismatch(SwarmCovError, ValueError):
    pass


class NonFiniteGradient(SwarmCovError, FloatingPointError):
    """Training produced NaN/inf gradients; usually the learning rate is too high."""


class FormatError(SwarmCovError, ValueError):
    pass


class EmptyMemory(SwarmCovError, RuntimeError):
    pass


class ExperimentDiverged(SwarmCovError, RuntimeError):
    def __init__(self, message, episode=None):
        super().__init__(message)
        self.episode = episode


class UndefinedForEmptyEpisode(SwarmCovError, ValueError):
    pass


class CorruptRecord(SwarmCovError, ValueError):
    pass


class ParseError(SwarmCovError, ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)
        self.line = line
        self.column = column


class ConstraintError(SwarmCovError, ValueError):
    pass


class RangeError(SwarmCovError, ValueError):
    pass
