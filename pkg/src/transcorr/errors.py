"""Exception and warning types shared across the package."""


class TranscorrError(Exception):
    """Base class for all package errors."""


class ConfigError(TranscorrError):
    """Bad configuration: unknown keys, invalid values, missing sections."""


class DataError(TranscorrError):
    """Bad input data: shape mismatch, inconsistent files, unparseable text."""


class StateError(DataError):
    """Input in the wrong state (e.g. unstandardized genotypes)."""


class NotPositiveDefiniteError(DataError):
    """Matrix claimed PSD has an eigenvalue below the noise tolerance."""


class InfeasibleModelError(ConfigError):
    """Effect model cannot realize the requested correlation."""


class NumericalInconsistencyError(TranscorrError):
    """A closed-form evaluation produced an impossible value (e.g. negative variance)."""


class SmallSampleWarning(UserWarning):
    """Debiasing produced a value outside its valid range; n is too small to trust it."""
