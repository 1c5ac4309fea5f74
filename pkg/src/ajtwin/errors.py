"""Exception hierarchy shared across the twin."""


class TwinError(Exception):
    """Base class for all errors raised by this package."""


class RejectedInputError(TwinError):
    """Caller supplied a value that fails a precondition (bad unit tag, NaN, ...)."""


class UndefinedTransportError(TwinError):
    """Transport physics is undefined, e.g. zero total gas flow."""


class BlockedTubeError(TwinError):
    """Ink deposition has reached the tube radius; the carrier path is closed."""


class CloggedNozzleError(TwinError):
    """Ink deposition has reached the nozzle radius."""


class DegenerateHeadspaceError(TwinError):
    """Vial liquid volume has reached the vial volume; no aerosol headspace left."""


class NumericalDifferentiationError(TwinError):
    """A finite-difference Jacobian produced non-finite entries."""


class ConditioningError(TwinError):
    """A matrix required by the filter/smoother is numerically singular."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InitializationError(TwinError):
    """Initial-state fit failed to converge; carries the best iterate found."""

    def __init__(self, message, best_state=None, best_objective=None):
        super().__init__(message)
        self.best_state = best_state
        self.best_objective = best_objective


class CalibrationError(TwinError):
    """EM calibration aborted (e.g. the filter diverged inside an E-step)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NotReadyError(TwinError):
    """The session has no state belief yet (initialization window not filled)."""


class RequestError(TwinError):
    """A malformed or out-of-bounds request sent to the twin service."""
