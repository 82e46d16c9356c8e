"""Raw-signal conditioning: R-peak detection, RR cleaning, breathing denoising."""
from __future__ import annotations

import numpy as np
from scipy import signal as sps

from . import wavelet
from .errors import (CutoffAboveNyquist, FlatSignal, SignalTooShort,
                     TooFewPeaks)
from .types import RrSeries, SignalTrace

RR_MIN_S = 0.3
RR_MAX_S = 2.0
REFRACTORY_S = 0.3
MAX_INTERP_RUN = 3


def _bandpass_qrs(x: np.ndarray, fs: float) -> np.ndarray:
    """Zero-phase 5-15 Hz band-pass emphasizing the QRS complex."""
    hi = min(15.0, 0.45 * fs)
    sos = sps.butter(2, [5.0, hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, x, padtype="even")


def detect_r_peaks(ecg: SignalTrace) -> np.ndarray:
    """Pan-Tompkins style R-peak detection.

    Band-pass -> derivative -> squaring -> 150 ms moving-window integration ->
    adaptive dual threshold with a 300 ms refractory period; each detection is
    refined to the local maximum of the band-passed signal within +/-50 ms.
    """
    fs = ecg.sample_rate_hz
    if fs < 100:
        raise ValueError(f"sample rate {fs} Hz too low for QRS detection")
    x = ecg.samples
    if len(x) / fs < 10.0:
        raise SignalTooShort(f"need >= 10 s of ECG, got {len(x) / fs:.1f} s")
    if np.std(x) < 1e-8 * (1.0 + np.abs(np.mean(x))):
        raise FlatSignal("ECG variance below detection threshold")

    bp = _bandpass_qrs(x, fs)
    deriv = np.gradient(bp)
    sq = deriv * deriv
    win = max(1, int(round(0.150 * fs)))
    integ = np.convolve(sq, np.ones(win) / win, mode="same")

    # candidate local maxima of the integrated signal
    cand, _ = sps.find_peaks(integ, distance=max(1, int(round(REFRACTORY_S * fs))))
    if len(cand) == 0:
        raise FlatSignal("no candidate peaks in integrated signal")

    lead = integ[: int(2 * fs)] if len(integ) >= int(2 * fs) else integ
    spki = float(np.max(lead))
    npki = float(np.mean(lead))
    refine = max(1, int(round(0.050 * fs)))
    refr = int(round(REFRACTORY_S * fs))

    peaks: list[int] = []
    for c in cand:
        thr = npki + 0.25 * (spki - npki)
        if integ[c] >= thr:
            lo = max(0, c - refine)
            hi = min(len(bp), c + refine + 1)
            r = lo + int(np.argmax(bp[lo:hi]))
            if not peaks or r - peaks[-1] >= refr:
                peaks.append(r)
                spki = 0.125 * integ[c] + 0.875 * spki
            else:
                npki = 0.125 * integ[c] + 0.875 * npki
        else:
            npki = 0.125 * integ[c] + 0.875 * npki

    if not peaks:
        raise FlatSignal("adaptive threshold found no QRS complexes")
    return np.array(sorted(set(peaks)), dtype=int)


def rr_from_peaks(peaks: np.ndarray, sample_rate_hz: float) -> RrSeries:
    """RR intervals from peak indices, with physiological rejection.

    Intervals outside [0.3 s, 2.0 s] are masked invalid; interior runs of at
    most three invalid intervals are replaced by linear interpolation between
    the neighboring valid values (mask stays False).
    """
    peaks = np.asarray(peaks)
    if len(peaks) < 2:
        raise TooFewPeaks(f"need >= 2 peaks, got {len(peaks)}")
    times = peaks.astype(float) / sample_rate_hz
    intervals = np.diff(times)
    valid = (intervals >= RR_MIN_S) & (intervals <= RR_MAX_S)

    values = intervals.copy()
    i = 0
    n = len(values)
    while i < n:
        if valid[i]:
            i += 1
            continue
        j = i
        while j < n and not valid[j]:
            j += 1
        run = j - i
        if run <= MAX_INTERP_RUN and i > 0 and j < n:
            left, right = values[i - 1], values[j]
            for k in range(run):
                values[i + k] = left + (right - left) * (k + 1) / (run + 1)
        i = j
    return RrSeries(peak_times_s=times, intervals_s=values, valid_mask=valid)


def usable_intervals(rr: RrSeries) -> tuple[np.ndarray, np.ndarray]:
    """First-peak times and values of intervals safe for feature extraction:
    valid ones plus interpolated replacements (which land back in range)."""
    in_range = (rr.intervals_s >= RR_MIN_S) & (rr.intervals_s <= RR_MAX_S)
    keep = rr.valid_mask | in_range
    return rr.peak_times_s[:-1][keep], rr.intervals_s[keep]


def butterworth_lowpass(trace: SignalTrace, cutoff_hz: float = 1.0,
                        order: int = 4) -> SignalTrace:
    """Zero-phase (forward-backward) Butterworth low-pass."""
    nyq = trace.sample_rate_hz / 2.0
    if cutoff_hz >= nyq:
        raise CutoffAboveNyquist(f"cutoff {cutoff_hz} Hz >= Nyquist {nyq} Hz")
    sos = sps.butter(order, cutoff_hz, btype="lowpass",
                     fs=trace.sample_rate_hz, output="sos")
    y = sps.sosfiltfilt(sos, trace.samples, padtype="even")
    return trace.with_samples(y)


def remove_baseline_wavelet(breath: SignalTrace) -> SignalTrace:
    """Subtract the deepest-level wavelet approximation (baseline offset)."""
    if breath.duration_s < 60.0:
        raise SignalTooShort(
            f"need >= 60 s for baseline estimation, got {breath.duration_s:.1f} s")
    depth = wavelet.baseline_depth(breath.sample_rate_hz)
    baseline = wavelet.approximation(breath.samples, depth)
    return breath.with_samples(breath.samples - baseline)


def preprocess_breathing(breath: SignalTrace, cutoff_hz: float = 1.0) -> SignalTrace:
    """Baseline removal followed by the 1 Hz low-pass."""
    return butterworth_lowpass(remove_baseline_wavelet(breath), cutoff_hz)
