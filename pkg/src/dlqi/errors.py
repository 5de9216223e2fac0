"""Exception hierarchy shared by all modules."""


class DLQIError(Exception):
    pass


class ParameterError(DLQIError, ValueError):
    pass


class ContainmentError(DLQIError, ValueError):
    pass


class DomainError(DLQIError, ValueError):
    pass


class CompositionError(DLQIError, ValueError):
    pass


class MembershipError(DLQIError, KeyError):
    pass


class ResourceError(DLQIError, MemoryError):
    pass


class CoverageError(DLQIError, ValueError):
    pass


class WindowError(DLQIError, ValueError):
    pass


class CloneBoxHypothesisError(DLQIError, ValueError):
    """Raised when the two clones do not satisfy mu(C_l) * mu(C_u) > 1."""


class MetricError(DLQIError, ValueError):
    pass
