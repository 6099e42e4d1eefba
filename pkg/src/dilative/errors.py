"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` used by the command line runner:
2 for configuration problems, 3 for numerical failures.
"""


class DilativeError(Exception):
    exit_code = 3

    def __init__(self, message: str, operation: str | None = None):
        super().__init__(message)
        self.operation = operation

    def record(self) -> dict:
        return {
            "error": type(self).__name__,
            "operation": self.operation,
            "message": str(self),
        }


class InvalidParams(DilativeError, ValueError):
    pass


class InvalidGamma(InvalidParams):
    pass


class InvalidKappa(InvalidParams):
    pass


class InvalidExponent(InvalidParams):
    """FFT inversion of an exponent did not produce a usable density."""


class DomainError(DilativeError, ValueError):
    pass


class NegativeTime(DomainError):
    pass


class SupportNotCovered(DomainError):
    pass


class NonConvergent(DilativeError, ArithmeticError):
    pass


class NonFinite(DilativeError, ArithmeticError):
    pass


class BranchUnsafe(DilativeError, ArithmeticError):
    """|empirical CF| fell below the gate, so its logarithm is not trustworthy."""


class PrereqFailed(DilativeError):
    pass


class BudgetExceeded(DilativeError):
    pass


class ConfigInvalid(DilativeError, ValueError):
    exit_code = 2
