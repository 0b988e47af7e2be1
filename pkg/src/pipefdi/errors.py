"""Exception hierarchy shared by the simulator, diagnosis and observers."""


class PipeFDIError(Exception):
    """Base class for all package errors."""


class ValidationError(PipeFDIError, ValueError):
    """An input violates a documented invariant.

    ``field`` names the offending attribute when there is one.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigurationError(ValidationError):
    """A run or step configuration is unusable (e.g. a step above the CFL guard)."""


class HeadDomainError(PipeFDIError, ValueError):
    """A square root of a negative pressure head was requested."""


class SimulationError(PipeFDIError, RuntimeError):
    """The truth simulation produced a non-finite or negative-head state."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t={t:.6g} s)")
        self.t = t


class InfeasibleConfigurationError(PipeFDIError, ValueError):
    """No physically admissible steady state exists for the requested setup."""


class CalibrationError(PipeFDIError, ValueError):
    """The calibration window is too short or otherwise unusable."""


class UsageError(PipeFDIError, RuntimeError):
    """An object was used before it was ready (e.g. uncalibrated residual bank)."""


class ObserverDivergenceError(PipeFDIError, RuntimeError):
    """An observer update became non-finite; ``last_state`` holds the last valid state."""

    def __init__(self, message, last_state=None, t=None):
        super().__init__(message if t is None else f"{message} (t={t:.6g} s)")
        self.last_state = last_state
        self.t = t


class TelemetryFormatError(PipeFDIError, ValueError):
    """A telemetry file does not conform to the CSV schema."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class TelemetryOrderError(TelemetryFormatError, ValidationError):
    """Sample times in a telemetry stream go backwards."""

    def __init__(self, message, line=None):
        TelemetryFormatError.__init__(self, message, line)
        self.field = "t"
