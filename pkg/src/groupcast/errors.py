"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented status codes without a lookup table:
2 for configuration problems, 3 for bad input data, 4 for numerical failures.
"""


class GroupcastError(Exception):
    exit_code = 1

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code}


class ConfigError(GroupcastError):
    exit_code = 2


class DataError(GroupcastError, ValueError):
    exit_code = 3


class NumericalError(GroupcastError, ArithmeticError):
    exit_code = 4


# series_core
class NonPositiveValue(DataError):
    def __init__(self, index, value):
        self.index = int(index)
        self.value = float(value)
        super().__init__(f"Box-Cox transform undefined: value {value!r} at index {index} is not > 0")


class DomainViolation(NumericalError):
    pass


class SeriesTooShort(DataError):
    pass


class SpecMismatch(DataError):
    pass


# sarima_engine
class InfeasibleOrder(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message, model=None):
        self.model = model
        super().__init__(message)


class DegenerateSeries(NumericalError):
    pass


class InvalidCoefficients(NumericalError):
    pass


# diagnostics_selection
class InsufficientSample(NumericalError):
    pass


class InvalidLags(DataError):
    pass


class NoFeasibleModel(NumericalError):
    pass


# grouping
class UnknownAttribute(ConfigError):
    pass


class EmptyBottom(DataError):
    pass


class KeyOutsideSchema(DataError):
    pass


class NonFiniteQuantity(DataError):
    pass


# reconciliation
class SingularSystem(NumericalError):
    pass


class DegenerateResiduals(UserWarning):
    """Warning: a node has zero residual variance and its weight was floored."""


# evaluation
class ZeroDenominator(NumericalError):
    pass


# ingestion
class MissingColumn(DataError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"missing required column(s): {', '.join(self.columns)}")


class BadDate(DataError):
    def __init__(self, row, value):
        self.row = row
        super().__init__(f"row {row}: cannot parse date {value!r} (expected ISO-8601)")


class BadQuantity(DataError):
    def __init__(self, row, value):
        self.row = row
        super().__init__(f"row {row}: quantity {value!r} is not a finite non-negative number")


class EmptyFile(DataError):
    pass
