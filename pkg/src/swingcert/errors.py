"""Exception types shared across the package."""


class SwingcertError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SwingcertError):
    """Input data violates a model invariant or schema rule."""


class ConnectivityError(ValidationError):
    """The coupling graph is disconnected where it must not be."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = tuple(component) if component is not None else ()


class ReductionError(ValidationError):
    """Passive-node elimination failed (isolated passive subnetwork)."""

    def __init__(self, message, isolated=None):
        super().__init__(message)
        self.isolated = tuple(isolated) if isolated is not None else ()


class ConvergenceError(SwingcertError):
    """An iterative solver did not converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class FrameError(SwingcertError):
    """Angle vectors are not expressed in the expected pinned frame."""


class CertificateError(SwingcertError):
    """Internal consistency check of the stability certificate failed."""


class NoEquilibriumError(SwingcertError):
    """The requested static operating point does not exist."""


class BracketError(SwingcertError):
    """A bisection bracket does not straddle the stability boundary."""

    def __init__(self, message, lo_verdict=None, hi_verdict=None):
        super().__init__(message)
        self.lo_verdict = lo_verdict
        self.hi_verdict = hi_verdict
