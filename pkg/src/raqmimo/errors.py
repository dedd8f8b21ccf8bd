"""Exception hierarchy shared by every module."""


class RaqMimoError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(RaqMimoError, ValueError):
    pass


class ConfigurationError(RaqMimoError):
    """Config file unreadable, incomplete, or missing a required section."""


class UndefinedNormalizationError(RaqMimoError, ArithmeticError):
    """NMSE requested for a user with zero scattered power (pure LoS)."""


class InvalidSpecializationError(RaqMimoError, ValueError):
    """A channel-specific closed form was called on a config it does not cover."""


class NotDerivedError(RaqMimoError, NotImplementedError):
    """No closed-form asymptote exists for the requested regime/channel pair."""


class InsufficientAntennasError(RaqMimoError, ValueError):
    pass


class DegenerateGeometryError(RaqMimoError, ArithmeticError):
    """The K x K matrix inside the ZF bound is singular or badly conditioned."""


class SingularEstimateError(RaqMimoError, ArithmeticError):
    """The estimated channel matrix is rank deficient, so ZF is undefined."""


class DegeneratePhaseError(RaqMimoError, ArithmeticError):
    """Phase factor is zero; the receiver sees nothing and ZF cannot invert."""


class TrialError(RaqMimoError):
    """Wraps an evaluator failure with the index of the offending trial."""

    def __init__(self, trial: int, cause: BaseException):
        super().__init__(f"trial {trial} failed: {cause!r}")
        self.trial = trial
        self.cause = cause
