"""Canonical 152-feature manifest, per-epoch assembly, and Z-score normalization.

Feature accounting (single-breathing-channel profile, the default):
    10 HRV time-domain + 34 statistical + 5 nonlinear + 3 sudden-variation
    + 21 RR frequency + 25 chest breathing + 6 coupling-band = 104,
    plus 48 re-evaluations of RR features at a second window width
    (time-domain sets at 9 epochs, the first frequency entries at 1 epoch)
    = 152.
The two-channel profile swaps 25 of those re-evaluations for the abdomen
breathing set: 104 + 25 + 23 = 152.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import features_resp, features_rr
from .epoching import (EpochGrid, build_epoch_grid, resolve_window,
                       window_rr_values, window_trace_values)
from .errors import EmptyTrainingSet, ManifestMismatch, SubjectUnusable
from .preprocess import usable_intervals
from .types import FourStage, Hypnogram, ProcessedSubject

N_FEATURES = 152

F1_WINDOW = 119
MULTI_WINDOW = 9


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    source: str      # extractor family
    window_n: int    # epochs
    units: str


@dataclass(frozen=True)
class FeatureManifest:
    entries: tuple

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("manifest names must be unique")
        if len(names) != N_FEATURES:
            raise ValueError(f"manifest must have {N_FEATURES} entries, got {len(names)}")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class FeatureMatrix:
    manifest: FeatureManifest
    values: np.ndarray           # n_epochs x 152
    missing_mask: np.ndarray     # True where the entry is missing
    labels: Optional[Hypnogram] = None
    subject_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
        if self.values.shape != self.missing_mask.shape:
            raise ValueError("values and missing_mask shapes differ")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.manifest):
            raise ManifestMismatch(
                f"matrix has {self.values.shape[1] if self.values.ndim == 2 else '?'} "
                f"columns, manifest has {len(self.manifest)}")

    @property
    def n_epochs(self) -> int:
        return self.values.shape[0]


@dataclass
class NormStats:
    manifest: FeatureManifest
    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray  # True where the training column had zero variance


# --- manifest construction ------------------------------------------------

def _entries(names: list[str], source: str, window_n: int, units: str = "") -> list[ManifestEntry]:
    return [ManifestEntry(n, source, window_n, units) for n in names]


def build_manifest(profile: str = "single", f1_window: int = F1_WINDOW,
                   multi_window: int = MULTI_WINDOW) -> FeatureManifest:
    """The canonical manifest for a breathing-channel profile."""
    if profile not in ("single", "two-channel"):
        raise ValueError(f"unknown profile {profile!r}")
    if f1_window % 2 == 0 or multi_window % 2 == 0:
        raise ValueError("window widths must be odd")
    MULTI_WINDOW_ = multi_window
    base: list[ManifestEntry] = []
    base += _entries(features_rr.HRV_TIME_NAMES, "rr_time", 1, "s")
    base += _entries(features_rr.STAT_NAMES, "rr_stat", 1, "s")
    base += _entries(features_rr.NONLINEAR_NAMES, "rr_nonlinear", MULTI_WINDOW_, "")
    base += [ManifestEntry("rr_f1", "rr_novel", f1_window, "s"),
             ManifestEntry("rr_f2", "rr_novel", MULTI_WINDOW_, "s"),
             ManifestEntry("rr_f3", "rr_novel", MULTI_WINDOW_, "s")]
    base += _entries(features_rr.FREQ_NAMES, "rr_freq", MULTI_WINDOW_, "")
    base += [ManifestEntry(f"br_chest_{n}", "breath_chest", 1, "")
             for n in features_resp.BREATH_NAMES]
    base += _entries(features_resp.CPC_NAMES, "cpc", MULTI_WINDOW_, "")

    if profile == "two-channel":
        base += [ManifestEntry(f"br_abd_{n}", "breath_abdomen", 1, "")
                 for n in features_resp.BREATH_NAMES]

    # second-window re-evaluations fill the remaining slots, in fixed order
    pool: list[ManifestEntry] = []
    pool += [ManifestEntry(f"{n}_w{MULTI_WINDOW_}", "rr_time", MULTI_WINDOW_, "s")
             for n in features_rr.HRV_TIME_NAMES]
    pool += [ManifestEntry(f"{n}_w{MULTI_WINDOW_}", "rr_stat", MULTI_WINDOW_, "s")
             for n in features_rr.STAT_NAMES]
    pool += [ManifestEntry(f"{n}_w1", "rr_freq", 1, "")
             for n in features_rr.FREQ_NAMES]
    need = N_FEATURES - len(base)
    base += pool[:need]
    return FeatureManifest(tuple(base))


def manifest_hash(manifest: FeatureManifest) -> str:
    import hashlib
    h = hashlib.sha256()
    for e in manifest.entries:
        h.update(f"{e.name}|{e.source}|{e.window_n}\n".encode())
    return h.hexdigest()


# --- assembly -------------------------------------------------------------

def _rr_epoch_means(times: np.ndarray, values: np.ndarray, grid: EpochGrid
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Per-epoch mean RR and interval counts over usable intervals."""
    idx = np.floor(times / grid.epoch_len_s).astype(int)
    ok = (idx >= 0) & (idx < grid.n_epochs)
    sums = np.bincount(idx[ok], weights=values[ok], minlength=grid.n_epochs)
    counts = np.bincount(idx[ok], minlength=grid.n_epochs)
    means = np.full(grid.n_epochs, np.nan)
    nz = counts > 0
    means[nz] = sums[nz] / counts[nz]
    return means, counts


def _window_slice(times: np.ndarray, values: np.ndarray, grid: EpochGrid,
                  center: int, n: int):
    span = resolve_window(grid, center, n)
    t0, t1 = span.time_span(grid)
    lo = np.searchsorted(times, t0, side="left")
    hi = np.searchsorted(times, t1, side="left")
    return times[lo:hi], values[lo:hi], span


def assemble_feature_matrix(subject: ProcessedSubject,
                            manifest: Optional[FeatureManifest] = None,
                            epoch_len_s: float = 30.0,
                            max_missing_frac: float = 0.5) -> FeatureMatrix:
    """Evaluate every manifest feature for every epoch of one subject."""
    if manifest is None:
        manifest = build_manifest("single")
    by_name = {e.name: e for e in manifest.entries}
    f1_n = by_name["rr_f1"].window_n
    multi_n = by_name["rr_f3"].window_n
    two_channel = any(e.source == "breath_abdomen" for e in manifest.entries)
    if two_channel and subject.breath_abdomen is None:
        raise SubjectUnusable(
            f"{subject.subject_id}: missing channel breath_abdomen "
            "required by the two-channel profile")

    duration = min(subject.rr.peak_times_s[-1], subject.breath_chest.duration_s)
    grid = build_epoch_grid(duration, epoch_len_s)
    times, values = usable_intervals(subject.rr)
    epoch_means, epoch_counts = _rr_epoch_means(times, values, grid)

    n_ep = grid.n_epochs
    cols = {e.name: np.full(n_ep, np.nan) for e in manifest.entries}
    windows = sorted({e.window_n for e in manifest.entries
                      if e.source in ("rr_time", "rr_stat", "rr_freq")})

    for c in range(n_ep):
        # RR windows reused across feature families
        win_cache = {}
        for n in windows:
            win_cache[n] = _window_slice(times, values, grid, c, n)

        for n in windows:
            _, vals, span = win_cache[n]
            suffix = "" if n == 1 else f"_w{n}"
            alt_suffix = f"_w{n}" if n == 1 else ""
            for group, fn in (("hrv", features_rr.hrv_time_features),
                              ("stat", features_rr.statistical_features)):
                names = (features_rr.HRV_TIME_NAMES if group == "hrv"
                         else features_rr.STAT_NAMES)
                # evaluate once per window width; store under whichever
                # manifest name exists for this width
                wanted = [nm for nm in names
                          if (nm + ("" if n == 1 else f"_w{n}")) in cols]
                if not wanted:
                    continue
                try:
                    feats = fn(vals)
                except features_rr.InsufficientData:
                    feats = {nm: np.nan for nm in names}
                for nm in wanted:
                    cols[nm + ("" if n == 1 else f"_w{n}")][c] = feats[nm]

            wt0, wt1 = span.time_span(grid)
            freq_wanted = [nm for nm in features_rr.FREQ_NAMES
                           if (nm + ("" if n == multi_n else f"_w{n}")) in cols]
            if freq_wanted:
                w_times, w_vals, _ = win_cache[n]
                try:
                    feats = features_rr.rr_freq_features(w_times, w_vals, wt0, wt1)
                except features_rr.InsufficientData:
                    feats = {nm: np.nan for nm in features_rr.FREQ_NAMES}
                key_sfx = "" if n == multi_n else f"_w{n}"
                for nm in freq_wanted:
                    cols[nm + key_sfx][c] = feats[nm]

        # nonlinear (9-epoch window)
        if "rr_sampen" in cols:
            _, vals9, _ = win_cache.get(multi_n) or _window_slice(
                times, values, grid, c, multi_n)
            try:
                feats = features_rr.nonlinear_features(vals9)
            except features_rr.InsufficientData:
                feats = {nm: np.nan for nm in features_rr.NONLINEAR_NAMES}
            for nm in features_rr.NONLINEAR_NAMES:
                cols[nm][c] = feats[nm]

        # novel sudden-variation features
        cols["rr_f1"][c] = _safe_novel(features_rr.novel_f1, epoch_means,
                                       epoch_counts, grid, c, f1_n)
        t9, v9, span9 = win_cache.get(multi_n) or _window_slice(
            times, values, grid, c, multi_n)
        cols["rr_f2"][c] = _safe_f2(epoch_means, epoch_counts, v9, c)
        cols["rr_f3"][c] = _safe_novel(features_rr.novel_f3, epoch_means,
                                       epoch_counts, grid, c, multi_n)

        # breathing features
        for src, trace in (("breath_chest", subject.breath_chest),
                           ("breath_abdomen", subject.breath_abdomen)):
            prefix = "br_chest_" if src == "breath_chest" else "br_abd_"
            if trace is None or (prefix + features_resp.BREATH_NAMES[0]) not in cols:
                continue
            seg, _ = window_trace_values(trace, grid, c, 1)
            try:
                feats = features_resp.breath_features(seg, trace.sample_rate_hz)
            except features_resp.NoBreathsDetected:
                feats = {nm: np.nan for nm in features_resp.BREATH_NAMES}
            for nm in features_resp.BREATH_NAMES:
                cols[prefix + nm][c] = feats[nm]

        # cardiopulmonary coupling over the 9-epoch window
        if "cpc_sum_hf" in cols:
            seg, spanb = window_trace_values(subject.breath_chest, grid, c, multi_n)
            bt0, bt1 = spanb.time_span(grid)
            try:
                spec = features_resp.cpc_spectrum(
                    t9, v9, seg, subject.breath_chest.sample_rate_hz, bt0, bt1)
                feats = features_resp.cpc_band_features(spec)
            except (features_resp.InsufficientData, features_resp.ZeroTotal,
                    features_resp.LengthMismatch):
                feats = {nm: np.nan for nm in features_resp.CPC_NAMES}
            for nm in features_resp.CPC_NAMES:
                cols[nm][c] = feats[nm]

    mat = np.column_stack([cols[e.name] for e in manifest.entries])
    missing = ~np.isfinite(mat)
    if missing.mean() > max_missing_frac:
        raise SubjectUnusable(
            f"{subject.subject_id}: {missing.mean():.0%} of feature entries missing")

    labels = None
    if subject.hypnogram is not None:
        labs = subject.hypnogram.labels[:n_ep]
        if len(labs) == n_ep and subject.hypnogram.scheme == "four":
            labels = Hypnogram(tuple(labs), "four", epoch_len_s)
    return FeatureMatrix(manifest=manifest, values=mat, missing_mask=missing,
                         labels=labels, subject_id=subject.subject_id)


def _safe_novel(fn, epoch_means, epoch_counts, grid, center, n):
    try:
        return fn(epoch_means, epoch_counts, grid, center, n)
    except Exception:
        return np.nan


def _safe_f2(epoch_means, epoch_counts, window_values, center):
    try:
        return features_rr.novel_f2(epoch_means, epoch_counts, window_values, center)
    except Exception:
        return np.nan


# --- normalization --------------------------------------------------------

def fit_normalization(train: list[FeatureMatrix]) -> NormStats:
    """Per-feature mean/SD over all training epochs, ignoring missing entries.

    Population (divide-by-N) variance convention.
    """
    if not train:
        raise EmptyTrainingSet("no training matrices")
    manifest = train[0].manifest
    for m in train[1:]:
        if m.manifest.names != manifest.names:
            raise ManifestMismatch("training matrices disagree on manifest")
    stacked = np.vstack([m.values for m in train])
    mask = np.vstack([m.missing_mask for m in train])
    vals = np.where(mask, np.nan, stacked)
    with np.errstate(invalid="ignore"):
        mean = np.nanmean(vals, axis=0)
        sd = np.nanstd(vals, axis=0)  # population convention
    mean = np.where(np.isfinite(mean), mean, 0.0)
    sd = np.where(np.isfinite(sd), sd, 0.0)
    constant = sd == 0.0
    return NormStats(manifest=manifest, mean=mean, sd=sd, constant=constant)


def apply_normalization(matrix: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    """Z-score with training statistics; constant columns and missing entries
    map to 0 (the training mean)."""
    if matrix.manifest.names != stats.manifest.names:
        raise ManifestMismatch("matrix manifest differs from normalization stats")
    sd = np.where(stats.constant, 1.0, stats.sd)
    z = (matrix.values - stats.mean) / sd
    z = np.where(stats.constant[None, :], 0.0, z)
    z = np.where(matrix.missing_mask, 0.0, z)
    return FeatureMatrix(manifest=matrix.manifest, values=z,
                         missing_mask=matrix.missing_mask,
                         labels=matrix.labels, subject_id=matrix.subject_id)


def denormalize(matrix: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    sd = np.where(stats.constant, 1.0, stats.sd)
    x = matrix.values * sd + stats.mean
    return FeatureMatrix(manifest=matrix.manifest, values=x,
                         missing_mask=matrix.missing_mask,
                         labels=matrix.labels, subject_id=matrix.subject_id)
