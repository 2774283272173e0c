"""Exception types raised across notchbench."""


class NotchBenchError(Exception):
    """Base class for every error raised by this package."""


class UnknownLabel(NotchBenchError, KeyError):
    pass


class ScaleMismatch(NotchBenchError, ValueError):
    pass


class ParseError(NotchBenchError, ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateKey(ParseError):
    pass


class EmptyDataset(NotchBenchError, ValueError):
    pass


class NotFitted(NotchBenchError, RuntimeError):
    pass


class DimensionMismatch(NotchBenchError, ValueError):
    pass


class BadFractions(NotchBenchError, ValueError):
    pass


class BadK(NotchBenchError, ValueError):
    pass


class BadSpec(NotchBenchError, ValueError):
    pass


class BadParams(NotchBenchError, ValueError):
    pass


class EmptyNode(NotchBenchError, ValueError):
    pass


class NoOOB(NotchBenchError, ValueError):
    pass


class SingleClass(NotchBenchError, ValueError):
    pass


class ModeMismatch(NotchBenchError, ValueError):
    pass


class LengthMismatch(NotchBenchError, ValueError):
    pass


class EmptyDistribution(NotchBenchError, ValueError):
    pass


class NoChanges(NotchBenchError, ValueError):
    pass


class EmptyJoin(NotchBenchError, ValueError):
    pass


class ConfigError(NotchBenchError, ValueError):
    pass


class VersionMismatch(NotchBenchError, ValueError):
    pass


class CorruptModel(NotchBenchError, ValueError):
    pass
