"""Exception hierarchy shared by all modules."""


class IVRError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(IVRError, ValueError):
    pass


class UnsupportedConfigurationError(IVRError):
    """Raised for mesh/multiplier combinations the solvers do not handle."""


class SingularSchurError(IVRError):
    """The interface Schur complement could not be factorized."""


class ConfigurationError(IVRError):
    pass


class DivergenceError(IVRError, FloatingPointError):
    """A non-finite value appeared in the state during time stepping."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state detected at step {step}")


class EmptyBasisError(IVRError):
    pass


class MissingBasisError(IVRError, FileNotFoundError):
    pass
