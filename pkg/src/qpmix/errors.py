"""Exception hierarchy.

The CLI maps these onto its exit codes: configuration problems exit 1, data
problems exit 2 and numerical failures exit 3.
"""


class QpMixError(Exception):
    """Base class for all errors raised by qpmix."""


class ConfigError(QpMixError, ValueError):
    """Invalid parameter or parameter combination."""


class RetryExhaustedError(ConfigError):
    """Rejection sampling gave up after the configured number of attempts."""


class DataFormatError(QpMixError, ValueError):
    """Malformed input file."""


class NumericalError(QpMixError, ArithmeticError):
    """A numerical routine failed."""


class ConvergenceError(NumericalError):
    pass


class InfeasibleTestError(NumericalError):
    """A conditional-independence test cannot be carried out for this conditioning set."""


class SingularMatrixError(InfeasibleTestError):
    pass


class SampleSizeError(InfeasibleTestError):
    pass


class NoFeasibleSubsetError(NumericalError):
    """Every sampled conditioning subset produced an infeasible test."""
