"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FreeCLTError(Exception):
    exit_code = 1


class ContractError(FreeCLTError, ValueError):
    """An argument violates an operation's precondition."""

    exit_code = 2


class ConfigurationError(ContractError):
    exit_code = 2


class SizeLimitError(FreeCLTError):
    """Enumeration or summation would exceed a configured cap."""

    exit_code = 3

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class HypothesisViolation(FreeCLTError):
    """Input violates a limit theorem's hypothesis (vanishing variance, non-summable covariance)."""

    exit_code = 4


class DivergenceError(HypothesisViolation):
    pass


class DegenerateFunctionalError(HypothesisViolation):
    pass


class NumericError(FreeCLTError, ArithmeticError):
    exit_code = 5


class ModelInvalidError(NumericError):
    """Covariance model is not positive semidefinite where it has to be."""
