"""
Broadband pulse synthesis by modal summation.

The frequency-domain field of each mode follows the far-field normal-mode
sum; the time series is obtained by an inverse real FFT. The time
convention is exp(-i omega t), so a positive group delay corresponds to a
later arrival.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.io import wavfile

from .env import Waveguide
from .errors import SynthesisError
from .modes import DispersionTable, ModeSet, cutoff_filter, dispersion_table, group_velocity_perturbation, solve_modes

T0_FRACTION = 0.95


class WaveletKind(str, enum.Enum):
    RICKER = "ricker"
    GAUSSIAN_PULSE = "gaussian_pulse"


@dataclass(frozen=True)
class SourceWavelet:
    """
    Zero-phase source spectrum S(f).

    RICKER peaks at ``center_frequency`` with unit height. GAUSSIAN_PULSE is
    a Gaussian in frequency with standard deviation ``bandwidth`` (Hz); a
    very wide bandwidth approximates a flat unit spectrum.
    """

    kind: WaveletKind = WaveletKind.RICKER
    center_frequency: float = 40.0
    bandwidth: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveletKind(self.kind))
        if not self.center_frequency > 0:
            raise ValueError("center_frequency must be positive")
        if self.kind is WaveletKind.GAUSSIAN_PULSE and not (self.bandwidth and self.bandwidth > 0):
            raise ValueError("GAUSSIAN_PULSE needs a positive bandwidth")

    @classmethod
    def flat(cls, amplitude: float = 1.0) -> "SourceWavelet":
        """Unit-level spectrum over any practical band."""
        return cls(WaveletKind.GAUSSIAN_PULSE, 1.0, 1e9, amplitude)

    def spectrum(self, f) -> np.ndarray:
        f = np.abs(np.asarray(f, dtype=float))
        if self.kind is WaveletKind.RICKER:
            x = (f / self.center_frequency) ** 2
            s = x * np.exp(1.0 - x)
        else:
            s = np.exp(-0.5 * ((f - self.center_frequency) / self.bandwidth) ** 2)
        return self.amplitude * s


@dataclass(frozen=True)
class Scenario:
    source_depth: float
    receiver_depth: float
    range: float
    sample_rate: float
    duration: float

    def __post_init__(self):
        if self.source_depth <= 0 or self.receiver_depth <= 0:
            raise ValueError("source and receiver depths must be positive")
        if self.range <= 0:
            raise ValueError("range must be positive")
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")

    def validate(self, wg: Waveguide) -> None:
        for name, z in (("source", self.source_depth), ("receiver", self.receiver_depth)):
            if not 0 < z < wg.water_depth:
                raise ValueError(f"{name} depth {z:g} m not inside the water column")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real signal; ``t0`` is the absolute time of sample 0."""

    fs: float
    t0: float
    samples: np.ndarray

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if self.fs <= 0:
            raise ValueError("fs must be positive")
        if x.ndim != 1:
            raise ValueError("samples must be 1-D")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.fs

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def scaled(self, a: float) -> "TimeSeries":
        return TimeSeries(self.fs, self.t0, a * self.samples)

    def window(self, t_a: float, t_b: float) -> "TimeSeries":
        """Samples with absolute time in [t_a, t_b]."""
        t = self.times
        keep = (t >= t_a) & (t <= t_b)
        if not np.any(keep):
            raise ValueError(f"window [{t_a:g}, {t_b:g}] s holds no samples")
        i = int(np.argmax(keep))
        return TimeSeries(self.fs, float(t[i]), self.samples[keep])

    def energy(self) -> float:
        return float(np.sum(self.samples**2) / self.fs)

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "amplitude"])
            for t, x in zip(self.times, self.samples):
                w.writerow([f"{t:.9f}", f"{x:.12e}"])

    def save_wav(self, path, metadata: dict | None = None) -> Path:
        """32-bit float mono WAV plus a ``.json`` sidecar; returns the sidecar path."""
        path = Path(path)
        rate = int(round(self.fs))
        if abs(rate - self.fs) > 1e-9:
            raise ValueError("WAV needs an integer sample rate")
        wavfile.write(path, rate, self.samples.astype(np.float32))
        side = path.with_suffix(".json")
        meta = {"fs": self.fs, "t0": self.t0, "n_samples": len(self)}
        meta.update(metadata or {})
        side.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        return side


def load_wav(path) -> TimeSeries:
    """Read a WAV written by ``TimeSeries.save_wav``, honouring its sidecar ``t0``."""
    path = Path(path)
    rate, data = wavfile.read(path)
    side = path.with_suffix(".json")
    t0 = json.loads(side.read_text())["t0"] if side.exists() else 0.0
    return TimeSeries(float(rate), float(t0), np.asarray(data, dtype=float))


def load_timeseries_csv(path) -> TimeSeries:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != ("t_s", "amplitude"):
            raise ValueError("expected header t_s,amplitude")
        rows = np.array([[float(a), float(b)] for a, b in reader])
    dt = np.diff(rows[:, 0])
    fs = 1.0 / float(np.mean(dt))
    if abs(fs - round(fs)) < 1e-6 * fs:
        fs = float(round(fs))
    return TimeSeries(fs, float(rows[0, 0]), rows[:, 1])


# -- modal field --------------------------------------------------------------


def _modal_sum(k, alpha, psi_s, psi_r, rho_s: float, r: float) -> np.ndarray:
    """Sum over the leading (mode) axis; NaN entries denote absent modes."""
    present = ~np.isnan(k)
    k = np.where(present, k, 1.0)
    term = (
        np.where(present, psi_s * psi_r, 0.0)
        * np.exp(-np.where(present, alpha, 0.0) * r)
        * np.exp(1j * (k * r + np.pi / 4))
        / (rho_s * np.sqrt(8 * np.pi * r * k))
    )
    return term.sum(axis=0)


def transfer_function(wg: Waveguide, sc: Scenario, f: float, table_row: ModeSet) -> complex:
    """
    Complex pressure at the receiver for a unit source level at ``f``.

    Eigenfunctions are interpolated linearly in depth.
    """
    if sc.range == 0:
        raise SynthesisError("range must be non-zero")
    if not table_row.modes:
        return 0j
    if abs(table_row.frequency - f) > 1e-9 * max(1.0, f):
        raise ValueError("mode set was solved at a different frequency")
    k = table_row.wavenumbers
    alpha = np.array([m.attenuation for m in table_row.modes])
    psi_s = table_row.psi_at(sc.source_depth)
    psi_r = table_row.psi_at(sc.receiver_depth)
    rho_s = float(wg.density_at(sc.source_depth))
    return complex(_modal_sum(k, alpha, psi_s, psi_r, rho_s, sc.range))


def _solve_grid(f_lo: float, f_hi: float, solve_df: float) -> np.ndarray:
    n = int(np.ceil((f_hi - f_lo) / solve_df - 1e-9))
    return np.linspace(f_lo, f_hi, max(n, 1) + 1)


@lru_cache(maxsize=16)
def modal_table(
    wg: Waveguide,
    f_lo: float,
    f_hi: float,
    solve_df: float,
    max_modes: int,
    dz: float | None,
    probe_depths: tuple[float, ...],
) -> DispersionTable:
    """Cached dispersion table with eigenfunction probes, as used by ``synthesize``."""
    freqs = _solve_grid(f_lo, f_hi, solve_df)
    return dispersion_table(
        wg, f_lo, f_hi, solve_df, max_modes=max_modes, dz=dz, probe_depths=probe_depths, frequencies=freqs
    )


def _interp_runs(fc: np.ndarray, y: np.ndarray, present: np.ndarray, f: np.ndarray, cubic: bool) -> np.ndarray:
    """Interpolate ``y`` over each contiguous run of ``present``; NaN elsewhere."""
    out = np.full(f.shape, np.nan)
    edges = np.flatnonzero(np.diff(np.r_[0, present.astype(int), 0]))
    for a, b in zip(edges[::2], edges[1::2]):
        lo, hi = fc[a], fc[b - 1]
        sel = (f >= lo - 1e-9) & (f <= hi + 1e-9)
        if not np.any(sel):
            continue
        if b - a >= 4 and cubic:
            out[sel] = CubicSpline(fc[a:b], y[a:b])(f[sel])
        elif b - a >= 2:
            out[sel] = np.interp(f[sel], fc[a:b], y[a:b])
        else:
            out[sel & (np.abs(f - lo) < 1e-9)] = y[a]
    return out


def table_to_bins(
    table: DispersionTable,
    f: np.ndarray,
    source_depth: float,
    receiver_depth: float,
    min_depth_on_path: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Interpolate tracked modal quantities onto arbitrary frequencies.

    Wavenumbers and eigenfunction probes use cubic splines along each
    mode's presence interval; attenuation is linear. With
    ``min_depth_on_path`` modes are masked per frequency by the same
    turning-depth rule as ``cutoff_filter``.
    """
    fc = table.frequencies
    M = table.n_modes
    k = np.full((M, f.size), np.nan)
    alpha, ps, pr = k.copy(), k.copy(), k.copy()
    for i in range(M):
        present = ~np.isnan(table.k[i])
        if min_depth_on_path is not None:
            present &= table.turning[i] < min_depth_on_path
        k[i] = _interp_runs(fc, table.k[i], present, f, True)
        alpha[i] = _interp_runs(fc, table.alpha[i], present, f, False)
        ps[i] = _interp_runs(fc, table.psi[source_depth][i], present, f, True)
        pr[i] = _interp_runs(fc, table.psi[receiver_depth][i], present, f, True)
    return k, alpha, ps, pr


def synthesize(
    wg: Waveguide,
    sc: Scenario,
    src: SourceWavelet,
    f_band=(10.0, 100.0),
    *,
    max_modes: int = 10,
    dz: float | None = None,
    solve_df: float | None = 0.25,
    min_depth_on_path: float | None = None,
    t0: float | None = None,
    modes=None,
) -> TimeSeries:
    """
    Received waveform for an impulsive source.

    The spectrum S(f) H(f) is formed on the FFT grid of the scenario, set
    to zero outside ``f_band`` and inverted with a real FFT. Unless given,
    the window starts at ``t0 = 0.95 r / c_max`` with c_max the largest
    water sound speed.

    Modal quantities are solved every ``solve_df`` Hz and interpolated to
    the FFT bins along tracked mode curves; ``solve_df=None`` solves every
    bin exactly (slow, used to validate the interpolation).

    ``min_depth_on_path`` removes, per frequency, modes whose turning depth
    reaches the shallowest point of the path (seamount blocking).
    ``modes`` restricts the sum to the given 1-based mode numbers.

    Raises
    ------
    SynthesisError
        Band above Nyquist or empty, or the predicted arrival spread does
        not fit in 90% of the window.
    """
    sc.validate(wg)
    f_lo, f_hi = float(f_band[0]), float(f_band[1])
    fs = sc.sample_rate
    if not 0 < f_lo < f_hi:
        raise SynthesisError(f"empty band [{f_lo:g}, {f_hi:g}]")
    if f_hi >= fs / 2:
        raise SynthesisError(f"band edge {f_hi:g} Hz violates Nyquist for fs={fs:g}")
    n = sc.n_samples
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    in_band = (freqs >= f_lo) & (freqs <= f_hi)
    if not np.any(in_band):
        raise SynthesisError("no FFT bins inside the band")
    fb = freqs[in_band]
    if t0 is None:
        t0 = T0_FRACTION * sc.range / wg.max_water_speed

    if solve_df is None:
        k, alpha, ps, pr, vg = _exact_bins(wg, fb, sc, max_modes, dz, min_depth_on_path)
        labels = np.arange(1, k.shape[0] + 1)
    else:
        probes = (float(sc.source_depth), float(sc.receiver_depth))
        table = modal_table(wg, f_lo, f_hi, float(solve_df), int(max_modes), dz, tuple(sorted(set(probes))))
        k, alpha, ps, pr = table_to_bins(table, fb, sc.source_depth, sc.receiver_depth, min_depth_on_path)
        vg = table.vg
        labels = np.asarray(table.labels)
    if modes is not None:
        keep = np.isin(labels, [int(m) for m in modes])
        if not np.any(keep):
            raise SynthesisError(f"none of modes {list(modes)} is present")
        k, alpha, ps, pr, vg = (a[keep] for a in (k, alpha, ps, pr, vg))
    _check_window(vg, sc, t0)

    rho_s = float(wg.density_at(sc.source_depth))
    H = _modal_sum(k, alpha, ps, pr, rho_s, sc.range)
    P = np.zeros(freqs.size, dtype=complex)
    P[in_band] = src.spectrum(fb) * H
    Q = P * np.exp(-2j * np.pi * freqs * t0)
    x = np.fft.irfft(fs * np.conj(Q), n=n)
    return TimeSeries(fs, float(t0), x)


def _exact_bins(wg, fb, sc, max_modes, dz, min_depth):
    M = max_modes
    k = np.full((M, fb.size), np.nan)
    alpha, ps, pr, vg = k.copy(), k.copy(), k.copy(), k.copy()
    if dz is None:
        dz = min(1.0, wg.min_water_speed / fb.max() / 20.0)
    for j, f in enumerate(fb):
        ms = group_velocity_perturbation(solve_modes(wg, float(f), max_modes, dz), wg)
        if min_depth is not None:
            ms = cutoff_filter(ms, min_depth, wg)
        n = len(ms)
        if n == 0:
            continue
        k[:n, j] = ms.wavenumbers
        alpha[:n, j] = [m.attenuation for m in ms]
        ps[:n, j] = ms.psi_at(sc.source_depth)
        pr[:n, j] = ms.psi_at(sc.receiver_depth)
        vg[:n, j] = ms.group_velocities
    return k, alpha, ps, pr, vg


def _check_window(vg: np.ndarray, sc: Scenario, t0: float) -> None:
    v = vg[np.isfinite(vg)]
    if v.size == 0:
        return
    late = sc.range / v.min() - t0
    early = sc.range / v.max() - t0
    if early < 0:
        raise SynthesisError(f"earliest arrival precedes the window start by {-early:.3g} s")
    if late > 0.9 * sc.duration:
        raise SynthesisError(
            f"predicted arrivals extend {late:.3g} s past t0; exceeds 0.9 x duration {sc.duration:g} s"
        )


def scenario_dict(sc: Scenario) -> dict:
    return asdict(sc)
