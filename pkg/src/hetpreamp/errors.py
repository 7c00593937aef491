"""Exception types shared across the package."""


class HetPreampError(Exception):
    """Base class for all package errors."""


class ConfigError(HetPreampError, ValueError):
    """Invalid user-supplied parameter or configuration."""


class TruncationError(HetPreampError):
    """The Fock truncation is too small for the requested state or operator."""


class GridResolutionError(HetPreampError):
    """A position grid cannot resolve the requested operation."""


class EnvelopeError(HetPreampError):
    """The rejection-sampling envelope is unusable for the given state."""


class UnsupportedObservableError(HetPreampError):
    """The (amplifier, phase-space function) pair has no supported evaluation route."""


class BranchError(HetPreampError):
    """A closed-form expression hit a singular configuration."""
