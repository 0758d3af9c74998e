"""Exception hierarchy shared by every thermowigner module."""


class ThermoWignerError(Exception):
    """Base class for all errors raised by thermowigner."""


class InvalidStateError(ThermoWignerError, ValueError):
    """A phase-space coordinate is NaN or infinite."""


class DomainError(ThermoWignerError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ThermoWignerError, ValueError):
    """Inconsistent sizes, unknown keys or violated configuration invariants."""


class TruncationError(DomainError):
    """The Fock-space truncation is too small for the requested accuracy.

    Attributes
    ----------
    required_n_max : int
        Smallest truncation that satisfies the tail bound.
    """

    def __init__(self, message, required_n_max):
        super().__init__(message)
        self.required_n_max = required_n_max


class PropagationError(ThermoWignerError, RuntimeError):
    """Too many trajectories became non-finite during propagation."""
