"""Exception hierarchy shared by all modules."""


class ClassevoError(Exception):
    """Base class for all package errors."""


class DomainError(ClassevoError, ValueError):
    """An argument lies outside the admissible domain."""


class NumericDomainError(ClassevoError, ArithmeticError):
    """A model evaluation produced a non-finite value."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class IntegrationError(ClassevoError, RuntimeError):
    """The adaptive integrator could not reach the requested time.

    ``last_time`` is the last time at which an accepted state exists.
    """

    def __init__(self, message, last_time, member=None):
        super().__init__(message)
        self.last_time = last_time
        self.member = member


class ConservationError(IntegrationError):
    """A conserved quantity drifted beyond the configured tolerance."""

    def __init__(self, message, last_time, drift):
        super().__init__(message, last_time)
        self.drift = drift


class TruncationError(DomainError):
    """Fock cutoff too small for the requested state."""

    def __init__(self, message, required_cutoff):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class DegenerateStateError(DomainError):
    """A superposition has (numerically) vanishing norm."""


class FlowConsistencyError(ClassevoError, RuntimeError):
    """A phase-space flow failed its inverse round-trip probe."""
