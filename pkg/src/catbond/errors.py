"""Exception hierarchy shared across the engine."""


class CatbondError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class ConfigError(CatbondError):
    exit_code = 2


class DataError(CatbondError):
    exit_code = 3


class NumericError(CatbondError):
    exit_code = 4


class InvalidSample(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyDataset(DataError):
    pass


class DuplicateRegionRecord(DataError):
    pass


class InsufficientCommonEvents(DataError):
    pass


class ZeroWindow(DataError):
    pass


class InfiniteMoment(NumericError):
    pass


class NonConvergence(NumericError):
    pass


class DegenerateVariance(NumericError):
    pass
