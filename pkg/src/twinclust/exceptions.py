"""Exception hierarchy shared by every module.

Each exception carries a ``category`` string (used by the CLI to report the
failure) and an ``exit_code``: 2 for bad input, 3 for numerical failures.
"""


class TwinClustError(Exception):
    category = "Error"
    exit_code = 2


class InputError(TwinClustError, ValueError):
    category = "InputError"


class DataIOError(InputError, OSError):
    category = "IoError"


class ParseError(InputError):
    category = "ParseError"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyDataset(InputError):
    category = "EmptyDataset"


class DegenerateData(InputError):
    category = "DegenerateData"


class DimensionMismatch(InputError):
    category = "DimensionMismatch"


class LengthMismatch(InputError):
    category = "LengthMismatch"


class InvalidConfig(InputError):
    category = "InvalidConfig"


class InvalidInput(InputError):
    category = "InvalidInput"


class NumericalError(TwinClustError, ArithmeticError):
    category = "NumericalError"
    exit_code = 3


class NotConverged(NumericalError):
    """Raised when an iterative solver exhausts its iteration budget.

    ``best`` holds the last iterate (always feasible) and ``residual`` its
    optimality residual. ``column`` is set when the failure comes from one
    column of a batched similarity update.
    """

    category = "NotConverged"

    def __init__(self, message, best=None, residual=None, column=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.column = column


class ConvergenceFailure(NumericalError):
    category = "ConvergenceFailure"
