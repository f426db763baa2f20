"""
PNG renderings. Each figure is a convenience view of a CSV written
alongside it; tests only ever look at the CSVs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .modes import DispersionTable  # noqa: E402
from .synth import TimeSeries  # noqa: E402
from .tfr import Envelope, PeakList, RidgeCurve, Spectrogram  # noqa: E402

# Fixed metadata keeps PNG bytes independent of the wall clock.
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def arrival_curves(table: DispersionTable, range_m: float, modes=None):
    """(mode, f, t) triples with t = range / v_g, skipping absent entries."""
    out = []
    for i, lab in enumerate(table.labels):
        if modes is not None and int(lab) not in modes:
            continue
        v = table.vg[i]
        ok = np.isfinite(v) & (v > 0)
        if ok.sum() >= 2:
            out.append((int(lab), table.frequencies[ok], range_m / v[ok]))
    return out


def plot_waveform(ts: TimeSeries, path, env: Envelope | None = None, peaks: PeakList | None = None, title=""):
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(ts.times, ts.samples, lw=0.5, color="0.3")
    if env is not None:
        ax.plot(env.times, env.values, lw=1.0, color="tab:red", label="envelope")
    if peaks is not None and len(peaks):
        ax.plot(peaks.times, peaks.amplitudes, "kv", ms=4, label="peaks")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("pressure")
    ax.set_title(title)
    if env is not None:
        ax.legend(loc="upper left", fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_spectrogram(sp: Spectrogram, path, table: DispersionTable | None = None, range_m=None,
                     ridges=(), title="", f_max=None):
    fig, ax = plt.subplots(figsize=(8, 4))
    mag = sp.magnitudes
    db = 20 * np.log10(mag / max(mag.max(), 1e-300) + 1e-12)
    ax.pcolormesh(sp.times, sp.frequencies, db, shading="nearest", vmin=-50, vmax=0, cmap="viridis")
    if table is not None and range_m is not None:
        for lab, f, t in arrival_curves(table, range_m):
            ax.plot(t, f, lw=0.8, color="w", alpha=0.8)
            ax.text(t[-1], f[-1], str(lab), color="w", fontsize=6)
    for r in ridges:
        ax.plot(r.times, r.frequencies, ".", ms=2, color="tab:red")
    if f_max is not None:
        ax.set_ylim(0, f_max)
    ax.set_xlim(sp.times[0], sp.times[-1])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_dispersion(table: DispersionTable, path, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, lab in enumerate(table.labels):
        ax.plot(table.frequencies, table.vg[i], lw=1, label=f"mode {int(lab)}")
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("group speed (m/s)")
    ax.set_title(title)
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_eigenfunctions(ms, path, max_depth=None, title=""):
    fig, ax = plt.subplots(figsize=(5, 6))
    zmax = ms.water_depth if max_depth is None else max_depth
    keep = ms.z <= zmax
    for m in ms:
        ax.plot(m.psi[keep], ms.z[keep], lw=1, label=f"mode {m.index}")
    ax.invert_yaxis()
    ax.set_xlabel("psi")
    ax.set_ylabel("depth (m)")
    ax.set_title(title)
    if len(ms):
        ax.legend(fontsize=6)
    fig.tight_layout()
    return _save(fig, path)


def plot_ridges(ridges: list[RidgeCurve], path, table=None, range_m=None, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    if table is not None and range_m is not None:
        for lab, f, t in arrival_curves(table, range_m):
            ax.plot(t, f, lw=0.8, color="0.6")
    for i, r in enumerate(ridges, start=1):
        ax.plot(r.times, r.frequencies, ".", ms=3, label=f"component {i}")
    if ridges:
        t = np.concatenate([r.times for r in ridges if len(r.times)] or [np.zeros(1)])
        if t.size > 1:
            pad = 0.1 * (t.max() - t.min() + 1e-3)
            ax.set_xlim(t.min() - pad, t.max() + pad)
        ax.legend(fontsize=6)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_estimates(rows: list[dict], path):
    """True vs estimated range per method from the pipeline summary rows."""
    fig, ax = plt.subplots(figsize=(5, 4))
    true = [r["range_km"] for r in rows]
    lim = max(true) * 1.3
    ax.plot([0, lim], [0, lim], "k--", lw=0.8)
    for key, mk, lab in (("range_a_km", "o", "duration"), ("range_b_km", "s", "mode pair")):
        pts = [(r["range_km"], r[key]) for r in rows if r.get(key) is not None]
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, mk, label=lab)
    ax.set_xlabel("true range (km)")
    ax.set_ylabel("estimated range (km)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
