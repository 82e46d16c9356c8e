"""R-peak detection, RR cleaning, wavelet baseline, Butterworth low-pass."""
import numpy as np
import pytest

from cardiosleep import preprocess, wavelet
from cardiosleep.errors import (CutoffAboveNyquist, FlatSignal, SignalTooShort,
                                TooFewPeaks)
from cardiosleep.types import SignalTrace


def _impulse_ecg(rr_s, fs=200.0, pad_s=1.0):
    """Unit impulses at cumulative RR times; crude but a fair QRS stand-in."""
    times = pad_s + np.concatenate([[0.0], np.cumsum(rr_s)])
    n = int((times[-1] + pad_s) * fs)
    x = np.zeros(n)
    x[np.round(times * fs).astype(int)] = 1.0
    return SignalTrace("ECG", fs, x), times


def _qrs_ecg(rr_s, fs=200.0, pad_s=1.0):
    """Mexican-hat pulses (~40 ms wide) at cumulative RR times; closer to a
    real QRS than a bare impulse, with enough in-band energy to survive
    additive noise."""
    times = pad_s + np.concatenate([[0.0], np.cumsum(rr_s)])
    n = int((times[-1] + pad_s) * fs)
    x = np.zeros(n)
    tt = np.arange(-8, 9) / fs
    pulse = (1 - (tt / 0.02) ** 2) * np.exp(-0.5 * (tt / 0.02) ** 2)
    for t in times:
        i = int(round(t * fs))
        x[i - 8:i + 9] += pulse
    return SignalTrace("ECG", fs, x), times


class TestDetectRPeaks:
    def test_regular_train_recovered_within_one_sample(self):
        rr = np.full(74, 0.8)  # 75 peaks over 60 s
        ecg, truth = _impulse_ecg(rr)
        peaks = preprocess.detect_r_peaks(ecg)
        assert len(peaks) == 75
        assert np.max(np.abs(peaks / 200.0 - truth)) <= 1.5 / 200.0

    def test_noisy_train_mostly_recovered(self):
        rng = np.random.default_rng(0)
        rr = np.clip(rng.normal(0.9, 0.05, 120), 0.5, 1.4)
        ecg, truth = _qrs_ecg(rr)
        noisy = ecg.with_samples(ecg.samples + rng.normal(0, 0.1, len(ecg.samples)))
        peaks = preprocess.detect_r_peaks(noisy) / 200.0
        # count detections within 40 ms of a true peak
        hits = sum(np.min(np.abs(peaks - t)) <= 0.040 for t in truth)
        assert hits / len(truth) >= 0.99

    def test_flat_signal_rejected(self):
        with pytest.raises(FlatSignal):
            preprocess.detect_r_peaks(SignalTrace("ECG", 200.0, np.ones(4000)))

    def test_short_signal_rejected(self):
        with pytest.raises(SignalTooShort):
            preprocess.detect_r_peaks(
                SignalTrace("ECG", 200.0, np.random.default_rng(1).normal(size=400)))

    def test_refractory_suppresses_double_detections(self):
        rr = np.full(30, 1.0)
        ecg, _ = _impulse_ecg(rr)
        peaks = preprocess.detect_r_peaks(ecg)
        assert np.min(np.diff(peaks)) >= 0.3 * 200


class TestRrFromPeaks:
    def test_values_and_mask(self):
        peaks = np.array([0, 100, 200, 300])
        rr = preprocess.rr_from_peaks(peaks, 100.0)
        assert np.allclose(rr.intervals_s, 1.0)
        assert rr.valid_mask.all()

    def test_out_of_range_masked(self):
        # intervals 0.25 s, 2.5 s, 1.0 s; the first two fall outside [0.3, 2.0]
        peaks = np.array([0, 25, 275, 375], dtype=float)
        rr = preprocess.rr_from_peaks(peaks, 100.0)
        assert list(rr.valid_mask) == [False, False, True]

    def test_short_interior_run_interpolated(self):
        # middle interval 0.1 s sits between valid 1.0 s neighbors
        peaks = np.array([0, 100, 110, 210], dtype=float)
        rr = preprocess.rr_from_peaks(peaks, 100.0)
        assert list(rr.valid_mask) == [True, False, True]
        # linear interpolation between 1.0 and 1.0
        assert rr.intervals_s[1] == pytest.approx(1.0)

    def test_interpolation_is_linear_between_neighbors(self):
        times = [0.0, 0.8, 0.9, 1.0, 1.1, 2.3]
        peaks = np.round(np.array(times) * 1000)
        rr = preprocess.rr_from_peaks(peaks, 1000.0)
        # run of three 0.1 s intervals between 0.8 and 1.2
        expected = 0.8 + (1.2 - 0.8) * np.array([1, 2, 3]) / 4
        assert np.allclose(rr.intervals_s[1:4], expected)
        assert not rr.valid_mask[1:4].any()

    def test_edge_run_not_interpolated(self):
        peaks = np.array([0, 10, 110], dtype=float)  # leading 0.1 s interval
        rr = preprocess.rr_from_peaks(peaks, 100.0)
        assert rr.intervals_s[0] == pytest.approx(0.1)
        assert not rr.valid_mask[0]

    def test_long_run_left_alone(self):
        times = np.concatenate([[0.0, 1.0], 1.0 + 0.1 * np.arange(1, 5), [2.4]])
        rr = preprocess.rr_from_peaks(np.round(times * 1000), 1000.0)
        assert np.allclose(rr.intervals_s[1:5], 0.1, atol=1e-9)

    def test_single_peak_rejected(self):
        with pytest.raises(TooFewPeaks):
            preprocess.rr_from_peaks(np.array([5]), 100.0)

    def test_usable_intervals_drops_unfixed(self):
        peaks = np.array([0, 10, 110, 210], dtype=float)
        rr = preprocess.rr_from_peaks(peaks, 100.0)
        times, values = preprocess.usable_intervals(rr)
        assert np.allclose(values, [1.0, 1.0])
        assert np.allclose(times, [0.1, 1.1])


class TestButterworth:
    def _gain(self, freq, fs=25.0, cutoff=1.0, seconds=120.0):
        t = np.arange(int(fs * seconds)) / fs
        x = np.sin(2 * np.pi * freq * t)
        y = preprocess.butterworth_lowpass(
            SignalTrace("B", fs, x), cutoff).samples
        core = slice(int(5 * fs), int((seconds - 5) * fs))
        return np.sqrt(np.mean(y[core] ** 2) / np.mean(x[core] ** 2))

    def test_minus_six_db_at_cutoff(self):
        # two zero-phase passes double the -3 dB corner attenuation
        db = 20 * np.log10(self._gain(1.0))
        assert db == pytest.approx(-6.0, abs=0.3)

    def test_stopband_at_five_hz(self):
        assert 20 * np.log10(self._gain(5.0)) <= -40.0

    def test_dc_preserved(self):
        x = np.full(500, 3.7)
        y = preprocess.butterworth_lowpass(SignalTrace("B", 25.0, x)).samples
        assert np.allclose(y, 3.7, atol=1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=1000)
        b = rng.normal(size=1000)
        f = lambda x: preprocess.butterworth_lowpass(
            SignalTrace("B", 25.0, x)).samples
        assert np.allclose(f(2 * a + 3 * b), 2 * f(a) + 3 * f(b), atol=1e-9)

    def test_cutoff_at_nyquist_rejected(self):
        with pytest.raises(CutoffAboveNyquist):
            preprocess.butterworth_lowpass(
                SignalTrace("B", 2.0, np.zeros(100)), cutoff_hz=1.0)


class TestWaveletBaseline:
    def test_constant_reproduced_exactly_by_approximation(self):
        x = np.full(1000, 5.0)
        a = wavelet.approximation(x, 6)
        assert np.max(np.abs(a - 5.0)) <= 1e-9

    def test_pure_dc_offset_removed(self):
        fs = 25.0
        x = np.full(int(fs * 120), 7.0)
        out = preprocess.remove_baseline_wavelet(SignalTrace("B", fs, x)).samples
        assert np.max(np.abs(out)) <= 1e-6 * 7.0

    def test_breathing_band_preserved(self):
        fs = 25.0
        t = np.arange(int(fs * 300)) / fs
        x = np.sin(2 * np.pi * 0.3 * t)
        out = preprocess.remove_baseline_wavelet(SignalTrace("B", fs, x)).samples
        core = slice(int(10 * fs), -int(10 * fs))
        assert np.sqrt(np.mean((out - x)[core] ** 2)) <= 0.05

    def test_slow_drift_removed(self):
        fs = 25.0
        t = np.arange(int(fs * 600)) / fs
        drift = 2.0 * np.sin(2 * np.pi * 0.002 * t)
        x = np.sin(2 * np.pi * 0.3 * t) + drift
        out = preprocess.remove_baseline_wavelet(SignalTrace("B", fs, x)).samples
        core = slice(int(30 * fs), -int(30 * fs))
        resid = out[core] - np.sin(2 * np.pi * 0.3 * t)[core]
        assert np.sqrt(np.mean(resid ** 2)) <= 0.15

    def test_short_signal_rejected(self):
        with pytest.raises(SignalTooShort):
            preprocess.remove_baseline_wavelet(
                SignalTrace("B", 25.0, np.zeros(25 * 30)))

    def test_depth_rule(self):
        assert wavelet.baseline_depth(25.0) == 8
        assert wavelet.baseline_depth(200.0) == 11
