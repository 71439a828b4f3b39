"""Numerical laboratory for translating and self-similar Lagrangian mean curvature flows in C^2."""

from lmcf.errors import (
    DomainError,
    FlowHalted,
    IntegrationDiverged,
    LmcfError,
    MalformedCurveError,
    NotACoveringError,
    NotGraphicalError,
    SingularMetricError,
    StabilityError,
    TopologyError,
    UnwrapError,
    AmbiguousMultiplicityError,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousMultiplicityError",
    "DomainError",
    "FlowHalted",
    "IntegrationDiverged",
    "LmcfError",
    "MalformedCurveError",
    "NotACoveringError",
    "NotGraphicalError",
    "SingularMetricError",
    "StabilityError",
    "TopologyError",
    "UnwrapError",
]
