"""Exception hierarchy.

Each family carries the process exit code the CLI reports for it:
2 for bad input, 3 for violated model assumptions, 4 for numerical failure.
"""


class QsdError(Exception):
    exit_code = 1


class InputError(QsdError, ValueError):
    exit_code = 2


class ModelAssumptionError(QsdError):
    exit_code = 3


class NumericalError(QsdError, ArithmeticError):
    exit_code = 4


class NonStochasticRow(InputError):
    def __init__(self, row, total):
        self.row = row
        self.total = total
        super().__init__(f"row {row} sums to {total!r}, expected 1")


class NotAbsorbing(InputError):
    pass


class ConfigError(InputError):
    pass


class ParseError(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class GridMismatch(InputError):
    pass


class Reducible(ModelAssumptionError):
    pass


class NoAbsorption(ModelAssumptionError):
    pass


class NotHurwitz(ModelAssumptionError):
    pass


class NotStable(ModelAssumptionError):
    pass


class BelowThreshold(ModelAssumptionError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass
