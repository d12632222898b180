"""Exception hierarchy shared by all modules."""


class WhittleError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInputError(WhittleError, ValueError):
    pass


class ContractViolation(WhittleError, ValueError):
    pass


class BoundInapplicableError(WhittleError, ValueError):
    pass


class UnsupportedParametersError(WhittleError, ValueError):
    pass


class CrossingNeverHappens(WhittleError):
    """The belief never exceeds the threshold under passive updates."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SolverDegenerateError(WhittleError, ArithmeticError):
    pass


class BudgetError(WhittleError):
    """Exact enumeration would exceed its configured size limit."""


class ConfigError(WhittleError, ValueError):
    pass
