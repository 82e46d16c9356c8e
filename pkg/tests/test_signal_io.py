"""EDF, hypnogram text, feature-matrix CSV, and metadata round-trips."""
import numpy as np
import pytest

from cardiosleep import errors, signal_io
from cardiosleep.registry import FeatureMatrix, build_manifest
from cardiosleep.types import FourStage, Hypnogram, SignalTrace


def _sine_trace(label="ECG", rate=100.0, seconds=4.0, freq=2.0, amp=1.0):
    t = np.arange(int(rate * seconds)) / rate
    return SignalTrace(label, rate, amp * np.sin(2 * np.pi * freq * t))


class TestEdfRoundTrip:
    def test_two_signals_round_trip_within_quantization(self):
        traces = [_sine_trace("ECG", 200.0, 3.0, 5.0, 1.3),
                  _sine_trace("THOR RES", 25.0, 3.0, 0.3, 2.0)]
        out = signal_io.read_edf(signal_io.write_edf(traces))
        assert [t.channel_label for t in out] == ["ECG", "THOR RES"]
        for orig, back in zip(traces, out):
            assert back.sample_rate_hz == orig.sample_rate_hz
            assert len(back.samples) == len(orig.samples)
            # one 16-bit quantization step of the physical range
            step = np.ptp(orig.samples) / 65535
            assert np.max(np.abs(back.samples - orig.samples)) <= step + 1e-12

    def test_constant_signal_round_trips(self):
        tr = SignalTrace("FLAT", 10.0, np.full(30, 2.5))
        back = signal_io.read_edf(signal_io.write_edf([tr]))[0]
        assert np.allclose(back.samples, 2.5, atol=1e-3)

    def test_trailing_partial_record_dropped(self):
        tr = _sine_trace(rate=10.0, seconds=3.45)
        back = signal_io.read_edf(signal_io.write_edf([tr]))[0]
        assert len(back.samples) == 30  # 3 whole one-second records

    def test_header_size_arithmetic(self):
        data = signal_io.write_edf([_sine_trace()])
        assert int(data[184:192].decode().strip()) == 512
        assert int(data[252:256].decode().strip()) == 1


class TestEdfErrors:
    def test_short_file_raises_malformed(self):
        with pytest.raises(errors.MalformedHeader):
            signal_io.read_edf(b"0" * 100)

    def test_truncated_body_raises_truncated(self):
        data = signal_io.write_edf([_sine_trace()])
        with pytest.raises(errors.TruncatedData):
            signal_io.read_edf(data[:-10])

    def test_bad_header_byte_count(self):
        data = bytearray(signal_io.write_edf([_sine_trace()]))
        data[184:192] = b"300     "
        with pytest.raises(errors.MalformedHeader):
            signal_io.read_edf(bytes(data))

    def test_non_numeric_record_count(self):
        data = bytearray(signal_io.write_edf([_sine_trace()]))
        data[236:244] = b"oops    "
        with pytest.raises(errors.MalformedHeader):
            signal_io.read_edf(bytes(data))

    def test_zero_digital_range(self):
        data = bytearray(signal_io.write_edf([_sine_trace()]))
        # dig_min field of signal 0 starts at 256 + (16+80+8+8+8)*1
        start = 256 + 120
        data[start:start + 8] = b"32767   "
        with pytest.raises(errors.MalformedHeader):
            signal_io.read_edf(bytes(data))

    def test_fractional_duration_with_fractional_rate_unsupported(self):
        data = bytearray(signal_io.write_edf([_sine_trace()]))
        data[244:252] = b"0.3     "
        with pytest.raises(errors.UnsupportedVariant):
            signal_io.read_edf(bytes(data))

    def test_implausible_signal_count(self):
        data = bytearray(signal_io.write_edf([_sine_trace()]))
        data[252:256] = b"999 "
        with pytest.raises(errors.MalformedHeader):
            signal_io.read_edf(bytes(data))


class TestHypnogramText:
    def test_six_class_round_trip(self):
        text = "W\n1\n2\n3\n4\nR\n"
        hyp = signal_io.read_hypnogram(text)
        assert hyp.scheme == "six"
        assert signal_io.write_hypnogram(hyp) == text

    def test_four_class_round_trip(self):
        text = "WAKE\nLIGHT\nDEEP\nREM\n"
        hyp = signal_io.read_hypnogram(text)
        assert hyp.scheme == "four"
        assert list(hyp.indices()) == [0, 1, 2, 3]
        assert signal_io.write_hypnogram(hyp) == text

    def test_blank_lines_skipped(self):
        hyp = signal_io.read_hypnogram("W\n\n  \nR\n")
        assert len(hyp) == 2

    def test_unknown_token_reports_line(self):
        with pytest.raises(errors.UnknownToken, match="line 3"):
            signal_io.read_hypnogram("W\nW\nN2\n")

    def test_mixed_scheme_rejected(self):
        with pytest.raises(errors.MixedScheme):
            signal_io.read_hypnogram("W\nDEEP\n")

    def test_empty_text_gives_empty_four_class(self):
        hyp = signal_io.read_hypnogram("")
        assert len(hyp) == 0 and hyp.scheme == "four"


class TestFeatureMatrixCsv:
    def test_round_trip_bitwise(self, tmp_path):
        manifest = build_manifest("single")
        rng = np.random.default_rng(5)
        vals = rng.normal(size=(7, len(manifest)))
        vals[2, 10] = np.nan
        labels = Hypnogram(tuple(FourStage.LIGHT for _ in range(7)), "four")
        mat = FeatureMatrix(manifest, vals, ~np.isfinite(vals), labels, "s1")
        path = tmp_path / "s1.csv"
        signal_io.write_feature_matrix(mat, path)
        back = signal_io.read_feature_matrix(path, manifest)
        finite = np.isfinite(vals)
        assert np.array_equal(back.values[finite], vals[finite])
        assert np.array_equal(back.missing_mask, mat.missing_mask)
        assert back.labels is not None
        assert back.labels.labels == labels.labels
        assert back.subject_id == "s1"

    def test_unlabeled_rows_read_back_without_labels(self, tmp_path):
        manifest = build_manifest("single")
        vals = np.zeros((3, len(manifest)))
        mat = FeatureMatrix(manifest, vals, np.zeros_like(vals, dtype=bool))
        path = tmp_path / "x.csv"
        signal_io.write_feature_matrix(mat, path)
        back = signal_io.read_feature_matrix(path, manifest)
        assert back.labels is None

    def test_header_mismatch_rejected(self, tmp_path):
        manifest = build_manifest("single")
        path = tmp_path / "bad.csv"
        path.write_text("a,b,stage\n1,2,WAKE\n")
        with pytest.raises(errors.ManifestMismatch):
            signal_io.read_feature_matrix(path, manifest)


class TestSubjectMetadata:
    def test_round_trip(self):
        recs = [{"subject_id": "a", "ahi": 3.0}, {"subject_id": "b", "ahi": 0.5}]
        assert signal_io.read_subject_metadata(
            signal_io.write_subject_metadata(recs)) == recs

    def test_missing_subject_id(self):
        with pytest.raises(errors.MissingMetadata):
            signal_io.read_subject_metadata('{"ahi": 1.0}\n')

    def test_invalid_json_reports_line(self):
        with pytest.raises(errors.MissingMetadata, match="line 2"):
            signal_io.read_subject_metadata('{"subject_id": "a"}\nnot json\n')
