"""Exception types shared across the solver pipeline."""


class FpmError(Exception):
    """Base class for all fpmflex errors."""


class InvalidInputError(FpmError):
    """A precondition on user-supplied data was violated."""


class MeshParseError(FpmError):
    """Mesh file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NearCoincidentPointsError(FpmError):
    """Support points too close for a stable interpolation matrix."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class OutOfDomainError(FpmError):
    """Query location lies outside the subdomain it was evaluated in."""


class ConfigError(FpmError):
    """Run configuration is malformed or references unknown entities."""


class RigidBodyModeError(FpmError):
    """Singular factorization caused by unconstrained modes."""

    def __init__(self, message, null_dim=None):
        super().__init__(message)
        self.null_dim = null_dim


class DivergenceError(FpmError):
    """Newton iteration failed to converge."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class PropagationError(FpmError):
    """Solver failure inside a crack-propagation loop; carries partial history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []
