"""Exception hierarchy shared across the toolkit."""


class LdpkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LdpkitError):
    """An argument lies outside the effective domain required by the operation."""


class NoSamplerError(DomainError):
    """The model carries no sampler (analytic test oracles)."""


class NonConvergenceError(LdpkitError):
    """An iterative solver exhausted its iteration budget.

    Raised instead of returning a silently inaccurate value.
    """


class AmbiguityError(LdpkitError):
    """The requested object is not uniquely determined (e.g. a jump location
    over an extremizer set of positive measure)."""


class GradientRangeError(DomainError):
    """Gradient inversion target lies outside the attainable gradient range.

    ``side`` names the violated side: "below" or "above".
    """

    def __init__(self, side: str, message: str = ""):
        self.side = side
        super().__init__(message or f"target outside gradient range ({side})")
