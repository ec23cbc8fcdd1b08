"""Exception hierarchy shared by every module."""


class ICPMError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ICPMError, ValueError):
    pass


class ModelError(ICPMError):
    """The mechanical model is inconsistent (e.g. mass matrix not SPD)."""


class SingularVHCError(ICPMError):
    """The constraint controller is undefined at the requested state."""

    def __init__(self, message, q2=None):
        super().__init__(message)
        self.q2 = q2


class NumericError(ICPMError):
    pass


class InvalidOrbitError(ICPMError, ValueError):
    pass


class NoCrossingError(ICPMError):
    pass


class SectionInfeasibleError(ICPMError):
    pass


class SectionMismatchError(ICPMError):
    pass


class LinearizationError(ICPMError):
    def __init__(self, message, probe=None):
        super().__init__(message)
        self.probe = probe


class ConvergenceError(ICPMError):
    pass


class InvalidWeightsError(ICPMError, ValueError):
    pass


class OrbitEscapeError(ICPMError):
    """Raised when the section error exceeds the divergence bound.

    The partially simulated trajectory is kept on ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(ICPMError, ValueError):
    pass
