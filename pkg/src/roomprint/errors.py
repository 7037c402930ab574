"""Exception types shared across the roomprint package."""


class RoomprintError(Exception):
    """Base class for all domain errors raised by this package."""


class SignalTooShortError(RoomprintError):
    """Input audio is shorter than the analysis requires."""


class ConfigMismatchError(RoomprintError):
    """Two inputs disagree on sample rate or analysis configuration."""


class InsufficientFramesError(RoomprintError):
    """Too few frames for the RASTA filter warm-up."""


class InsufficientTrainingDataError(RoomprintError):
    """Training corpus too small for the requested mixture count."""


class FeatureMismatchError(RoomprintError):
    """Feature vectors disagree in length or extraction configuration."""


class InsufficientClassSupportError(RoomprintError):
    """A class has fewer samples than the cross-validation requires."""


class NoBandsInRangeError(RoomprintError):
    """Filterbank frequency range contains no complete band."""


class BandUnresolvableError(RoomprintError):
    """Band too narrow to resolve at the given sample rate and length."""


class ZeroEnergyError(RoomprintError):
    """Signal has no energy; decay analysis undefined."""


class InsufficientDecayError(RoomprintError):
    """Decay curve never reaches the depth the fit window requires."""


class DegenerateTargetError(RoomprintError):
    """Filter fit produced a singular or non-finite system."""


class ManifestInvalidError(RoomprintError):
    """Dataset manifest violates a split or pairing invariant."""


class UnsupportedFormatError(RoomprintError):
    """File is not a format this package reads."""


class CorruptFileError(RoomprintError):
    """File is recognized but truncated or inconsistent."""
