"""Exception hierarchy shared by all conelab modules."""


class ConelabError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class DomainError(ConelabError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class NumericalError(ConelabError, RuntimeError):
    """A numerical procedure failed to reach its contract."""


class NotStrictlyStable(DomainError):
    pass


class PreconditionViolated(DomainError):
    pass


class UnsupportedDimension(DomainError):
    pass


class UnknownMode(DomainError):
    pass


class OutOfDomain(DomainError):
    pass


class EmptyIntersection(DomainError):
    pass


class IntegrationDiverged(NumericalError):
    pass


class SideViolation(NumericalError):
    pass


class InsufficientTail(NumericalError):
    pass


class GraphFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class DegenerateMetric(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class InsufficientScales(DomainError):
    pass
