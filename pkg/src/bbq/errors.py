"""Exception hierarchy shared by all bbq modules."""


class BBQError(Exception):
    """Base class for every error raised by the package."""


class DataError(BBQError, ValueError):
    """Input data is unusable (non-finite samples, corrupt files)."""


class InvariantError(BBQError, ValueError):
    """A structural invariant of a field is violated (e.g. Hermitian symmetry)."""


class ParameterError(BBQError, ValueError):
    """An argument is outside its admissible range."""


class PreconditionError(BBQError, ValueError):
    """The input does not satisfy an operation's precondition."""


class ConfigError(BBQError, ValueError):
    """A grid, run configuration or file layout is invalid."""


class StabilityError(BBQError, RuntimeError):
    """The advective CFL number exceeds twice the configured safety bound."""


class BlowUpError(BBQError, RuntimeError):
    """A trajectory lost finiteness or exceeded the blow-up norm bound.

    Attributes:
        last_time: time of the last state that passed the checks.
        trajectory: partial trajectory up to ``last_time`` when available.
    """

    def __init__(self, message, last_time, trajectory=None):
        super().__init__(message)
        self.last_time = last_time
        self.trajectory = trajectory
