"""Exception types shared across the package."""


class OwlinkError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(OwlinkError, ValueError):
    """An argument violates an operation's precondition."""


class NotFoundError(OwlinkError, KeyError):
    """A lookup key has no matching entry."""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class DegradedSignalError(OwlinkError):
    """The eye is closed: no usable two-level structure at the sampling point.

    Carries the measured Q-factor (possibly ``nan``) so callers can still
    report it.
    """

    def __init__(self, message, q_factor=float("nan")):
        super().__init__(message)
        self.q_factor = q_factor


class LowConfidenceError(OwlinkError):
    """Delay estimate whose normalized correlation peak is below threshold.

    ``tau_d_s`` and ``correlation_peak`` hold the best estimate found.
    """

    def __init__(self, message, tau_d_s, correlation_peak):
        super().__init__(message)
        self.tau_d_s = tau_d_s
        self.correlation_peak = correlation_peak


class ConfigError(OwlinkError):
    """Configuration file could not be parsed or validated."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line
        self.path = None

    def location(self):
        """``path:line`` prefix for diagnostics (empty when unknown)."""
        parts = [str(p) for p in (self.path, self.line) if p is not None]
        return ":".join(parts)
