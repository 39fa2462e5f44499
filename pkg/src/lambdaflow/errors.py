"""Exception hierarchy shared by all modules."""


class LambdaFlowError(Exception):
    """Base class for every error raised by :mod:`lambdaflow`."""


class DomainError(LambdaFlowError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(LambdaFlowError, ValueError):
    """Invalid scenario or run configuration."""


class PreconditionError(LambdaFlowError):
    """A mathematical precondition of an operation does not hold."""


class ConcatenationGapError(DomainError):
    """The second curve does not start where the first one is cut."""


class CoercivityError(PreconditionError):
    """The energy violates its quadratic lower bound at an evaluated point."""


class NotASolutionError(PreconditionError):
    """The input curve fails the energy dissipation check.

    The failing report is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
