"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 usage, 3 data, 4 numeric.
"""


class HdflError(Exception):
    exit_code = 1


class UsageError(HdflError):
    exit_code = 2


class ConfigError(UsageError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DataError(HdflError, ValueError):
    exit_code = 3


class InvalidDimensionError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class DegenerateLabelsError(DataError):
    pass


class UnsplittableError(DataError):
    pass


class DuplicatePointError(DataError):
    pass


class NumericError(HdflError, ArithmeticError):
    exit_code = 4


class ZeroWeightError(NumericError):
    pass


class NoDirectionError(NumericError):
    pass


class UndefinedEstimateError(NumericError):
    pass
