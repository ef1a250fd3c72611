"""Classical (constrained) versus quantum evolution of quantum systems."""

from .errors import (
    ClassevoError,
    ConservationError,
    DegenerateStateError,
    DomainError,
    FlowConsistencyError,
    IntegrationError,
    NumericDomainError,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "ClassevoError",
    "ConservationError",
    "DegenerateStateError",
    "DomainError",
    "FlowConsistencyError",
    "IntegrationError",
    "NumericDomainError",
    "TruncationError",
    "__version__",
]
