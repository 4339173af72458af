"""Exception hierarchy shared by the solver modules."""


class PlapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(PlapError, ValueError):
    """Invalid user input: exponents, tolerances, config keys."""


class DomainError(PlapError, ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class LandmarkError(PlapError):
    """A root or minimum bracket for a nonlinearity landmark was not found."""


class HypothesisError(PlapError):
    """A structural hypothesis on the nonlinearity could not be witnessed."""


class StartupError(PlapError):
    """Picard iteration near r = 0 failed to contract."""


class IntegrationError(PlapError):
    """The adaptive integrator gave up; ``state`` holds the last valid state."""

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class BarrierError(PlapError):
    """Quadrature for the compact-support barrier diverged."""


class SearchError(PlapError):
    """Bracketing of a node-count transition failed."""


class ContractError(PlapError):
    """A documented precondition of an operation was violated."""
