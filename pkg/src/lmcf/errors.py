"""Exception hierarchy shared by all modules."""


class LmcfError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LmcfError, ValueError):
    """An argument lies outside the domain of the operation."""


class MalformedCurveError(LmcfError, ValueError):
    """Curve with too few points or coincident consecutive points."""


class StabilityError(LmcfError):
    """Explicit time step exceeds the stability bound.

    ``required_dt`` carries the largest admissible step.
    """

    def __init__(self, message, required_dt):
        super().__init__(message)
        self.required_dt = required_dt


class FlowHalted(LmcfError):
    """Curvature passed the blow-up threshold; ``state`` is the last state reached."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


class IntegrationDiverged(LmcfError):
    """ODE integration produced a non-finite state."""


class SingularMetricError(LmcfError):
    """First fundamental form is (nearly) degenerate at ``node``."""

    def __init__(self, message, node):
        super().__init__(message)
        self.node = node


class UnwrapError(LmcfError):
    """Angle field jumps by more than pi/2 across a grid edge."""


class NotGraphicalError(LmcfError):
    """Projection onto the reference plane is degenerate."""


class TopologyError(LmcfError):
    """An open path was supplied where a closed loop is required."""


class NotACoveringError(LmcfError):
    """Preimage counts over a component are not constant.

    ``witnesses`` lists ``(point, count)`` pairs exhibiting the mismatch.
    """

    def __init__(self, message, witnesses):
        super().__init__(message)
        self.witnesses = witnesses


class AmbiguousMultiplicityError(LmcfError):
    """A cluster density is not within the acceptance band of an integer."""

    def __init__(self, message, density):
        super().__init__(message)
        self.density = density
