"""Four-class sleep staging (Wake / Light / Deep / REM) from single-lead ECG
and respiratory-effort signals: preprocessing, 152-feature extraction,
cohort selection, a from-scratch bidirectional LSTM, and evaluation."""

__version__ = "0.1.0"

from .types import (FourStage, Hypnogram, RrSeries, SignalTrace, SixStage,
                    SubjectRecord)

__all__ = ["FourStage", "Hypnogram", "RrSeries", "SignalTrace", "SixStage",
           "SubjectRecord", "__version__"]
