"""Typed error hierarchy shared across the pipeline."""


class CardiosleepError(Exception):
    """Base class for all pipeline errors."""


# --- file parsing ---------------------------------------------------------

class MalformedHeader(CardiosleepError):
    pass


class UnsupportedVariant(CardiosleepError):
    pass


class TruncatedData(CardiosleepError):
    pass


class UnknownToken(CardiosleepError):
    pass


class MixedScheme(CardiosleepError):
    pass


class ManifestMismatch(CardiosleepError):
    pass


class MissingMetadata(CardiosleepError):
    pass


# --- signal conditioning --------------------------------------------------

class SignalTooShort(CardiosleepError):
    pass


class FlatSignal(CardiosleepError):
    pass


class TooFewPeaks(CardiosleepError):
    pass


class CutoffAboveNyquist(CardiosleepError):
    pass


class RecordingTooShort(CardiosleepError):
    pass


# --- feature extraction ---------------------------------------------------

class InsufficientData(CardiosleepError):
    pass


class MissingCenter(CardiosleepError):
    pass


class NoValidEpochs(CardiosleepError):
    pass


class NoBreathsDetected(CardiosleepError):
    pass


class LengthMismatch(CardiosleepError):
    pass


class ZeroTotal(CardiosleepError):
    pass


class SubjectUnusable(CardiosleepError):
    pass


class EmptyTrainingSet(CardiosleepError):
    pass


# --- cohort ---------------------------------------------------------------

class NegativeAhi(CardiosleepError):
    pass


class EmptyHypnogram(CardiosleepError):
    pass


class EmptyList(CardiosleepError):
    pass


# --- model ----------------------------------------------------------------

class ShapeMismatch(CardiosleepError):
    pass


class NonFiniteInput(CardiosleepError):
    pass


class NonFiniteLoss(CardiosleepError):
    pass


class EmptyDataset(CardiosleepError):
    pass


# --- evaluation -----------------------------------------------------------

class EmptyMatrix(CardiosleepError):
    pass


class DegenerateMarginals(CardiosleepError):
    pass


# --- synthesis / config ---------------------------------------------------

class InvalidProfile(CardiosleepError):
    pass


class ConfigError(CardiosleepError):
    pass
