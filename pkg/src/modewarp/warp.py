"""
Refractive warping h(u) = t_r - u**-2, its inverse, and warp-domain mode
separation (warp, band-pass, unwarp).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.interpolate import CubicSpline

from .errors import SeparationError, WarpError
from .synth import TimeSeries
from .tfr import Envelope, PeakList, RidgeCurve, extract_ridge, find_peaks, stft

FILTER_ORDER = 4
AUTO_PROMINENCE = 0.1


@dataclass(frozen=True)
class WarpConfig:
    """
    Parameters of the warping operator.

    Attributes
    ----------
    t_r : float
        Reference time on the absolute time axis of the signal (s).
    output_fs : float or None
        Sample rate of the warped grid; ``None`` picks 4x the highest
        warped frequency implied by the input band edge.
    guard : float
        Exclusion zone before ``t_r`` (s); no sample may lie inside it.
    """

    t_r: float
    output_fs: float | None = None
    guard: float = 0.05

    def __post_init__(self):
        if not self.guard > 0:
            raise WarpError("guard must be positive")
        if self.output_fs is not None and not self.output_fs > 0:
            raise WarpError("output_fs must be positive")


@dataclass(frozen=True)
class ModeBand:
    center: float
    halfwidth: float
    mode_hint: int | None = None

    def __post_init__(self):
        if not self.center > self.halfwidth > 0:
            raise SeparationError(f"band needs center > halfwidth > 0, got {self.center}, {self.halfwidth}")

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth


def h(u, t_r: float):
    """Warping map from warped coordinate u to time."""
    return t_r - np.asarray(u, dtype=float) ** -2


def h_inv(t, t_r: float):
    """Inverse map (t_r - t)**-1/2."""
    return (t_r - np.asarray(t, dtype=float)) ** -0.5


def _spline(ts: TimeSeries):
    # Zero samples pad both ends so the cubic decays to 0 outside the support.
    x = np.concatenate(([0.0], ts.samples, [0.0]))
    t = ts.t0 + (np.arange(x.size) - 1) / ts.fs
    return CubicSpline(t, x, bc_type="natural", extrapolate=False), t[0], t[-1]


def _eval(spl, lo, hi, q):
    out = np.zeros_like(q)
    inside = (q >= lo) & (q <= hi)
    out[inside] = spl(q[inside])
    return out


def warped_fs(ts: TimeSeries, cfg: WarpConfig, f_max: float | None = None) -> float:
    """
    Default warped sample rate.

    A component at frequency f and time t appears at warped frequency
    f * h'(u) = 2 f (t_r - t)**1.5, largest at the earliest sample.
    """
    if cfg.output_fs is not None:
        return float(cfg.output_fs)
    f_max = ts.fs / 2 if f_max is None else f_max
    return 4.0 * 2.0 * f_max * (cfg.t_r - ts.t0) ** 1.5


def warp(ts: TimeSeries, cfg: WarpConfig, f_max: float | None = None) -> TimeSeries:
    """
    Warp ``ts`` into the u domain: y(u) = sqrt(h'(u)) s(h(u)).

    The returned series has ``t0 = u_min``; its "sample rate" is in
    samples per unit of u.
    """
    t_end = ts.times[-1]
    if t_end > cfg.t_r - cfg.guard:
        nz = np.flatnonzero(ts.samples)
        if nz.size and ts.times[nz[-1]] > cfg.t_r - cfg.guard:
            raise WarpError(
                f"signal support reaches {ts.times[nz[-1]]:.4f} s, inside the guard before t_r={cfg.t_r:.4f} s"
            )
        t_end = cfg.t_r - cfg.guard
    if ts.t0 >= t_end:
        raise WarpError("t_r lies before the signal start")
    fs_u = warped_fs(ts, cfg, f_max)
    u0 = float(h_inv(ts.t0, cfg.t_r))
    u1 = float(h_inv(t_end, cfg.t_r))
    n = int(np.floor((u1 - u0) * fs_u)) + 1
    # Nyquist sanity: the grid must resolve the warped image of the band edge.
    if fs_u < 2.0 * 2.0 * (f_max or ts.fs / 2) * (cfg.t_r - ts.t0) ** 1.5 * 0.999:
        raise WarpError(f"output_fs={fs_u:g} too low for the warped bandwidth")
    u = u0 + np.arange(n) / fs_u
    spl, lo, hi = _spline(ts)
    y = np.sqrt(2.0 * u**-3) * _eval(spl, lo, hi, h(u, cfg.t_r))
    return TimeSeries(fs_u, u0, y)


def unwarp(
    tw: TimeSeries,
    cfg: WarpConfig,
    fs: float,
    t_start: float | None = None,
    n_samples: int | None = None,
) -> TimeSeries:
    """
    Map a warped series back to time: s(t) = sqrt(g'(t)) w(g(t)) with
    g(t) = (t_r - t)**-1/2, sampled at ``fs`` from ``t_start``.
    """
    if t_start is None:
        t_start = float(h(tw.t0, cfg.t_r))
    if n_samples is None:
        t_stop = min(float(h(tw.times[-1], cfg.t_r)), cfg.t_r - cfg.guard)
        n_samples = int(np.floor((t_stop - t_start) * fs)) + 1
    t = t_start + np.arange(n_samples) / fs
    if n_samples and t[-1] > cfg.t_r - cfg.guard + 1e-12:
        raise WarpError(f"requested times up to {t[-1]:.4f} s reach the guard before t_r={cfg.t_r:.4f} s")
    spl, lo, hi = _spline(tw)
    g = h_inv(t, cfg.t_r)
    x = np.sqrt(0.5 * (cfg.t_r - t) ** -1.5) * _eval(spl, lo, hi, g)
    return TimeSeries(fs, t_start, x)


def default_t_r(peaks: PeakList, fraction: float = 0.1) -> float:
    """Last envelope peak plus ``fraction`` of the first-to-last peak spread."""
    if len(peaks) < 2:
        raise WarpError("need at least two envelope peaks to place t_r")
    d = peaks[-1].time - peaks[0].time
    return peaks[-1].time + fraction * d


def interception_window(peaks: PeakList, shrink: float = 0.1) -> tuple[float, float]:
    """First-to-last peak segment shrunk by ``shrink`` of its length on each side."""
    if len(peaks) < 2:
        raise WarpError("need at least two envelope peaks for an interception window")
    a, b = peaks[0].time, peaks[-1].time
    d = b - a
    return a + shrink * d, b - shrink * d


def auto_bands(tw: TimeSeries, prominence: float = AUTO_PROMINENCE, nperseg: int | None = None) -> list[ModeBand]:
    """
    One band per prominent peak of the Welch spectrum of a warped signal,
    each half as wide as the gap to its nearest neighbour.
    """
    if nperseg is None:
        nperseg = max(16, len(tw) // 2)
    nperseg = min(nperseg, len(tw))
    f, pxx = signal.welch(tw.samples, fs=tw.fs, window="hann", nperseg=nperseg, nfft=4 * nperseg)
    amp = np.sqrt(pxx)
    if not np.any(amp > 0):
        raise SeparationError("warped signal has no spectral content")
    idx, _ = signal.find_peaks(amp, prominence=prominence * amp.max())
    idx = idx[f[idx] > 0]
    if idx.size == 0:
        raise SeparationError("no spectral peaks found in the warped signal")
    c = f[idx]
    bands = []
    for i, ci in enumerate(c):
        gaps = [abs(ci - c[j]) for j in (i - 1, i + 1) if 0 <= j < c.size]
        hw = 0.5 * min(gaps) if gaps else 0.5 * ci
        bands.append(ModeBand(float(ci), float(min(hw, 0.999 * ci))))
    return bands


def check_overlap(bands) -> None:
    b = sorted(bands, key=lambda x: x.center)
    for x, y in zip(b, b[1:]):
        if x.hi > y.lo + 1e-9 * max(1.0, y.lo):
            raise SeparationError(
                f"bands overlap: [{x.lo:.3f}, {x.hi:.3f}] and [{y.lo:.3f}, {y.hi:.3f}]"
            )


def bandpass(tw: TimeSeries, band: ModeBand, order: int = FILTER_ORDER) -> TimeSeries:
    """Zero-phase Butterworth band-pass (forward-backward)."""
    nyq = tw.fs / 2
    lo = band.lo / nyq
    hi = band.hi / nyq
    if lo >= 1:
        raise SeparationError(f"band {band.lo:g}-{band.hi:g} lies above the warped Nyquist {nyq:g}")
    if hi >= 1:
        sos = signal.butter(order, lo, btype="highpass", output="sos")
    else:
        sos = signal.butter(order, [lo, hi], btype="bandpass", output="sos")
    return TimeSeries(tw.fs, tw.t0, signal.sosfiltfilt(sos, tw.samples))


@dataclass(frozen=True, eq=False)
class SeparatedMode:
    band: ModeBand
    signal: TimeSeries
    ridge: RidgeCurve


@dataclass(frozen=True, eq=False)
class Separation:
    cfg: WarpConfig
    warped: TimeSeries
    modes: list = field(default_factory=list)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    def save(self, outdir, metadata: dict | None = None) -> Path:
        """Numbered WAV/CSV per mode, ridge CSVs and ``manifest.json``."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, m in enumerate(self.modes, start=1):
            stem = f"mode_{i:02d}"
            m.signal.save_csv(out / f"{stem}.csv")
            wav = None
            if abs(m.signal.fs - round(m.signal.fs)) < 1e-9:
                m.signal.save_wav(out / f"{stem}.wav", {"mode": i})
                wav = f"{stem}.wav"
            m.ridge.save_csv(out / f"{stem}_ridge.csv")
            entries.append(
                {
                    "mode": i,
                    "warped_center": m.band.center,
                    "warped_halfwidth": m.band.halfwidth,
                    "csv": f"{stem}.csv",
                    "wav": wav,
                    "ridge_csv": f"{stem}_ridge.csv",
                }
            )
        manifest = {
            "t_r": self.cfg.t_r,
            "guard": self.cfg.guard,
            "warped_fs": self.warped.fs,
            "filter": {"family": "butterworth", "order": FILTER_ORDER, "zero_phase": True},
            "modes": entries,
        }
        manifest.update(metadata or {})
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def separate_modes(
    ts: TimeSeries,
    cfg: WarpConfig,
    bands=None,
    *,
    f_max: float | None = None,
    ridge_band=None,
    window_length: int | None = None,
    allow_overlap: bool = False,
    prominence: float = AUTO_PROMINENCE,
) -> Separation:
    """
    Warp, band-pass each mode band, unwarp and extract one ridge per mode.

    Parameters
    ----------
    ts : TimeSeries
        Intercepted dispersion segment, ending before ``cfg.t_r - cfg.guard``.
    bands : list of ModeBand, optional
        Warped-domain bands; detected from the Welch spectrum when omitted.
    f_max : float, optional
        Upper band edge of the input, used for the default warped rate.
    ridge_band : (float, float), optional
        Frequency band for ridge extraction (default 0 to Nyquist).

    Returns
    -------
    Separation
        Modes ordered by ascending warped centre frequency.
    """
    tw = warp(ts, cfg, f_max)
    if bands is None:
        bands = auto_bands(tw, prominence)
    bands = sorted(bands, key=lambda b: b.center)
    if not bands:
        raise SeparationError("no bands to separate")
    if not allow_overlap:
        check_overlap(bands)
    if ridge_band is None:
        ridge_band = (0.0, ts.fs / 2)
    out = []
    for b in bands:
        filt = bandpass(tw, b)
        x = unwarp(filt, cfg, ts.fs, ts.t0, len(ts))
        wl = window_length or min(len(x), max(4, int(round(0.2 * ts.fs))))
        ridge = extract_ridge(stft(x, wl), ridge_band)
        out.append(SeparatedMode(b, x, ridge))
    return Separation(cfg, tw, out)


def ridge_table_rms(ridge: RidgeCurve, freqs: np.ndarray, vg: np.ndarray, range_m: float, t_origin: float = 0.0):
    """
    RMS frequency distance from a ridge to a modal arrival curve.

    The curve is t(f) = t_origin + range_m / v_g(f). For each ridge point
    the residual is the distance to the nearest crossing of the curve at
    the ridge time; points outside the curve's time span are skipped.

    Returns
    -------
    (rms, n_used)
    """
    ok = np.isfinite(vg) & (vg > 0)
    f = np.asarray(freqs)[ok]
    t = t_origin + range_m / np.asarray(vg)[ok]
    res = []
    for ti, fi in zip(ridge.times, ridge.frequencies):
        d = t - ti
        cross = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)
        if cross.size == 0:
            continue
        fc = []
        for j in cross:
            den = d[j] - d[j + 1]
            w = 0.0 if den == 0 else d[j] / den
            fc.append(f[j] + w * (f[j + 1] - f[j]))
        res.append(min(abs(fi - x) for x in fc))
    if not res:
        return float("inf"), 0
    return float(np.sqrt(np.mean(np.square(res)))), len(res)


def envelope_window(env: Envelope, peaks: PeakList | None = None, shrink: float = 0.1):
    """Convenience: (t_r, (t_a, t_b)) from an envelope using the default rules."""
    peaks = find_peaks(env) if peaks is None else peaks
    return default_t_r(peaks), interception_window(peaks, shrink)
