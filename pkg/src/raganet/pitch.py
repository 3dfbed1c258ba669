"""Monophonic fundamental-frequency tracking.

A deliberately simple single-candidate tracker: per frame, the Hann-windowed
normalized autocorrelation is searched for its best peak in the candidate
lag range, with parabolic interpolation for sub-sample lag precision.  The
raw autocorrelation of a windowed frame decays with lag, which would bias
peaks toward shorter lags; dividing by the window's own autocorrelation
removes that bias, so a stationary periodic frame scores close to 1 at its
true period.  No cross-frame path search is performed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import ensure_positive

UNVOICED = -1.0  # contour-dump marker


@dataclass(frozen=True)
class PitchConfig:
    fmin_hz: float = 75.0
    fmax_hz: float = 600.0
    hop_s: float = 0.010
    frame_s: float = 0.040
    voicing_threshold: float = 0.45
    octave_cost: float = 0.01

    def __post_init__(self):
        ensure_positive("fmin_hz", self.fmin_hz)
        if not self.fmin_hz < self.fmax_hz:
            raise ValueError("need 0 < fmin_hz < fmax_hz")
        ensure_positive("hop_s", self.hop_s)
        if self.hop_s > self.frame_s:
            raise ValueError("hop_s must not exceed frame_s")
        if not 0.0 <= self.voicing_threshold <= 1.0:
            raise ValueError("voicing_threshold must be in [0, 1]")


@dataclass
class PitchContour:
    """Per-frame f0 estimates at frame-center times.

    ``f0_hz`` is meaningful only where ``voiced`` is True.
    """

    hop_s: float
    t: np.ndarray
    f0_hz: np.ndarray
    voiced: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def voiced_f0(self) -> np.ndarray:
        return self.f0_hz[self.voiced]


def _parabolic(r, idx):
    """Refine integer peak positions with a 3-point parabola."""
    rm = r[np.arange(len(idx)), idx - 1]
    r0 = r[np.arange(len(idx)), idx]
    rp = r[np.arange(len(idx)), idx + 1]
    denom = rm - 2.0 * r0 + rp
    delta = np.where(np.abs(denom) > 1e-30, 0.5 * (rm - rp) / denom, 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    peak = r0 - 0.25 * (rm - rp) * delta
    return idx + delta, peak


def track_pitch(samples, sample_rate, cfg: PitchConfig = PitchConfig()) -> PitchContour:
    """Track f0 over ``samples`` and return one frame per hop.

    A frame is voiced iff its best (window-corrected, parabolic-interpolated)
    autocorrelation peak is at least ``cfg.voicing_threshold``; among
    near-equal peaks a small octave cost prefers the shortest lag, which
    suppresses period-multiple (sub-octave) errors for clean tones.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1D array")
    if sample_rate < 8000:
        raise ValueError(f"sample_rate must be >= 8000, got {sample_rate}")
    if cfg.fmax_hz >= sample_rate / 2:
        raise ValueError("fmax_hz must be below the Nyquist frequency")

    frame_len = int(round(cfg.frame_s * sample_rate))
    hop = int(round(cfg.hop_s * sample_rate))
    if samples.size < frame_len:
        raise ValueError(
            f"audio shorter than one analysis frame ({frame_len} samples)"
        )
    lag_min = max(2, int(np.floor(sample_rate / cfg.fmax_hz)))
    lag_max = int(np.ceil(sample_rate / cfg.fmin_hz))
    if lag_max + 2 > frame_len:
        raise ValueError("frame_s too short for fmin_hz (need one full period "
                         "plus interpolation margin per frame)")

    frames = np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop]
    n_frames = frames.shape[0]
    window = np.hanning(frame_len)

    nfft = 1
    while nfft < 2 * frame_len:
        nfft *= 2

    def _acf(x):
        spec = np.fft.rfft(x, n=nfft, axis=-1)
        return np.fft.irfft(spec.real**2 + spec.imag**2, n=nfft,
                            axis=-1)[..., :lag_max + 2]

    xw = (frames - frames.mean(axis=1, keepdims=True)) * window
    acf = _acf(xw)
    energy = acf[:, 0]
    acf_w = _acf(window)
    acf_w = acf_w / acf_w[0]

    live = energy > 0.0
    r = np.zeros_like(acf)
    r[live] = acf[live] / energy[live, None]
    r = r / acf_w  # undo the window-induced decay

    # local maxima inside the candidate lag range
    lags = np.arange(lag_max + 2)
    in_range = (lags >= lag_min) & (lags <= lag_max)
    is_peak = np.zeros_like(r, dtype=bool)
    is_peak[:, 1:-1] = (r[:, 1:-1] > r[:, :-2]) & (r[:, 1:-1] >= r[:, 2:])
    is_peak &= in_range[None, :]
    is_peak &= live[:, None]

    octave_penalty = cfg.octave_cost * np.log2(lags[lag_min:] / lag_min)
    score = np.full_like(r, -np.inf)
    score[:, lag_min:] = r[:, lag_min:] - octave_penalty[None, :]
    score[~is_peak] = -np.inf

    best = np.argmax(score, axis=1)
    has_peak = np.isfinite(score[np.arange(n_frames), best])
    best = np.where(has_peak, best, lag_min + 1)  # safe index for the gather

    lag_star, strength = _parabolic(r, best)
    f0 = np.where(lag_star > 0, sample_rate / np.maximum(lag_star, 1e-9), 0.0)
    voiced = has_peak & (strength >= cfg.voicing_threshold)
    f0 = np.clip(f0, cfg.fmin_hz, cfg.fmax_hz)
    f0 = np.where(voiced, f0, 0.0)

    t = (np.arange(n_frames) * hop + frame_len / 2.0) / sample_rate
    return PitchContour(hop_s=hop / sample_rate, t=t, f0_hz=f0, voiced=voiced)


def write_contour_csv(contour: PitchContour, path) -> None:
    """Dump a contour as ``t,f0`` rows with -1 marking unvoiced frames."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f0"])
        for t, f0, v in zip(contour.t, contour.f0_hz, contour.voiced):
            w.writerow([f"{t:.6f}", f"{f0:.6f}" if v else f"{UNVOICED:.0f}"])


def read_contour_csv(path) -> PitchContour:
    """Read a ``t,f0`` dump; hop is inferred from the time column."""
    ts, f0s = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["t", "f0"]:
            raise ValueError(f"{path}: expected header 't,f0'")
        for row in reader:
            if not row:
                continue
            ts.append(float(row[0]))
            f0s.append(float(row[1]))
    t = np.asarray(ts)
    f0 = np.asarray(f0s)
    voiced = f0 > 0
    hop = float(np.median(np.diff(t))) if len(t) > 1 else 0.010
    return PitchContour(hop_s=hop, t=t, f0_hz=np.where(voiced, f0, 0.0),
                        voiced=voiced)


class PitchTracker(TransformerMixin, BaseEstimator):
    """Transformer from ``(samples, sample_rate)`` pairs to pitch contours.

    Hyperparameters mirror :class:`PitchConfig`; the operation is pure, so
    ``fit`` only validates them.
    """

    def __init__(self, fmin_hz: float = 75.0, fmax_hz: float = 600.0,
                 hop_s: float = 0.010, frame_s: float = 0.040,
                 voicing_threshold: float = 0.45, octave_cost: float = 0.01):
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.hop_s = hop_s
        self.frame_s = frame_s
        self.voicing_threshold = voicing_threshold
        self.octave_cost = octave_cost

    def _config(self) -> PitchConfig:
        return PitchConfig(
            fmin_hz=self.fmin_hz, fmax_hz=self.fmax_hz, hop_s=self.hop_s,
            frame_s=self.frame_s, voicing_threshold=self.voicing_threshold,
            octave_cost=self.octave_cost,
        )

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, X):
        cfg = self._config()
        return [track_pitch(samples, rate, cfg) for samples, rate in X]
