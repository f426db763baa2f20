"""Spectrograms, analytic-signal envelopes, envelope peaks and spectral ridges."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

from .synth import TimeSeries

DEFAULT_WINDOW_S = 0.2
DEFAULT_MIN_PROMINENCE = 0.1
DEFAULT_MIN_SEPARATION = 0.05
RIDGE_FLOOR = 0.05


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Magnitude STFT; ``magnitudes[i, j]`` is frequency i at frame j."""

    times: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray
    window_length: int
    hop: int

    def __post_init__(self):
        if self.magnitudes.shape != (self.frequencies.size, self.times.size):
            raise ValueError("magnitudes shape does not match the time/frequency grids")
        if not np.all(np.isfinite(self.magnitudes)):
            raise ValueError("magnitudes must be finite")

    def band_energy(self, f_lo: float, f_hi: float, t_lo: float = -np.inf, t_hi: float = np.inf) -> float:
        """Sum of squared magnitudes over a time-frequency box."""
        fi = (self.frequencies >= f_lo) & (self.frequencies <= f_hi)
        ti = (self.times >= t_lo) & (self.times <= t_hi)
        return float(np.sum(self.magnitudes[np.ix_(fi, ti)] ** 2))

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "f_hz", "mag"])
            for j, t in enumerate(self.times):
                for i, f in enumerate(self.frequencies):
                    w.writerow([f"{t:.6f}", f"{f:.6f}", f"{self.magnitudes[i, j]:.9e}"])


def stft(ts: TimeSeries, window_length: int | None = None, hop: int | None = None) -> Spectrogram:
    """
    Hann-windowed magnitude STFT.

    Defaults: 0.2 s windows with 50% overlap. Frame times are window
    centres on the absolute time axis of ``ts``.
    """
    if window_length is None:
        window_length = max(4, int(round(DEFAULT_WINDOW_S * ts.fs)))
    if hop is None:
        hop = max(1, window_length // 2)
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if window_length > len(ts):
        raise ValueError(f"window of {window_length} samples exceeds signal length {len(ts)}")
    win = signal.get_window("hann", window_length)
    frames = np.lib.stride_tricks.sliding_window_view(ts.samples, window_length)[::hop]
    mags = np.abs(np.fft.rfft(frames * win, axis=1)).T
    starts = np.arange(frames.shape[0]) * hop
    times = ts.t0 + (starts + 0.5 * (window_length - 1)) / ts.fs
    freqs = np.fft.rfftfreq(window_length, 1.0 / ts.fs)
    return Spectrogram(times, freqs, mags, window_length, hop)


@dataclass(frozen=True, eq=False)
class Envelope:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")
        if np.any(self.values < 0):
            raise ValueError("envelope values must be non-negative")

    @property
    def fs(self) -> float:
        return 1.0 / float(self.times[1] - self.times[0])

    def shifted(self, dt: float) -> "Envelope":
        return Envelope(self.times + dt, self.values)

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "envelope"])
            for t, v in zip(self.times, self.values):
                w.writerow([f"{t:.9f}", f"{v:.12e}"])


def envelope(ts: TimeSeries, f_max: float | None = 100.0, smooth_width: int | None = None) -> Envelope:
    """
    Magnitude of the analytic signal, optionally moving-average smoothed.

    The smoothing width defaults to ``fs / f_max`` samples; pass
    ``f_max=None`` (and no ``smooth_width``) for the raw magnitude.
    """
    if len(ts) < 4:
        raise ValueError("envelope needs at least 4 samples")
    mag = np.abs(signal.hilbert(ts.samples))
    if smooth_width is None and f_max is not None:
        smooth_width = int(round(ts.fs / f_max))
    if smooth_width and smooth_width > 1:
        mag = uniform_filter1d(mag, smooth_width, mode="nearest")
    return Envelope(ts.times, np.maximum(mag, 0.0))


@dataclass(frozen=True)
class Peak:
    time: float
    amplitude: float
    prominence: float
    index: int


class PeakList(tuple):
    """Time-ordered tuple of ``Peak``."""

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self])


def find_peaks(
    env: Envelope,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
    min_separation: float = DEFAULT_MIN_SEPARATION,
) -> PeakList:
    """
    Local maxima of an envelope with prominence of at least
    ``min_prominence`` times the envelope maximum, at least
    ``min_separation`` seconds apart (the taller peak wins).
    """
    if not 0 < min_prominence <= 1:
        raise ValueError("min_prominence must lie in (0, 1]")
    v = env.values
    vmax = float(v.max()) if v.size else 0.0
    if vmax <= 0:
        return PeakList()
    distance = max(1, int(np.ceil(min_separation * env.fs - 1e-9)))
    idx, props = signal.find_peaks(v, prominence=min_prominence * vmax, distance=distance)
    return PeakList(
        Peak(float(env.times[i]), float(v[i]), float(p), int(i))
        for i, p in zip(idx, props["prominences"])
    )


@dataclass(frozen=True, eq=False)
class RidgeCurve:
    times: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray

    def __len__(self):
        return self.times.size

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "f_hz", "mag"])
            for t, f, m in zip(self.times, self.frequencies, self.magnitudes):
                w.writerow([f"{t:.6f}", f"{f:.6f}", f"{m:.9e}"])


def extract_ridge(sp: Spectrogram, f_band=(0.0, np.inf), floor: float = RIDGE_FLOOR) -> RidgeCurve:
    """
    Per-frame spectral maximum within ``f_band``, refined by a parabola
    through the peak bin and its neighbours. Frames whose maximum is below
    ``floor`` times the largest in-band magnitude are dropped.
    """
    fi = np.flatnonzero((sp.frequencies >= f_band[0]) & (sp.frequencies <= f_band[1]))
    if fi.size == 0:
        raise ValueError(f"no spectrogram bins inside band {tuple(f_band)}")
    sub = sp.magnitudes[fi]
    top = float(sub.max()) if sub.size else 0.0
    if top <= 0:
        return RidgeCurve(np.array([]), np.array([]), np.array([]))
    df = sp.frequencies[1] - sp.frequencies[0]
    ts, fs_, ms = [], [], []
    for j in range(sub.shape[1]):
        col = sub[:, j]
        i = int(np.argmax(col))
        if col[i] < floor * top:
            continue
        f = sp.frequencies[fi[i]]
        mag = col[i]
        if 0 < i < col.size - 1:
            a, b, c = col[i - 1], col[i], col[i + 1]
            den = a - 2 * b + c
            if den < 0:
                off = 0.5 * (a - c) / den
                f = f + off * df
                mag = b - 0.25 * (a - c) * off
        ts.append(sp.times[j])
        fs_.append(f)
        ms.append(mag)
    return RidgeCurve(np.array(ts), np.array(fs_), np.array(ms))
