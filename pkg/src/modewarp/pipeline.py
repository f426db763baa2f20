"""
End-to-end processing shared by the CLI: synthesis over a transect,
envelope analysis, warping separation, ridge matching and both range
estimators, plus the four-range demonstration.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fixtures, plots
from .config import RunConfig
from .env import min_depth_over
from .errors import ModewarpError, RangingError, SeparationError, WarpError
from .modes import DispersionTable, dispersion_table
from .ranging import (
    RangeEstimate,
    dispersion_duration,
    equivalent_speeds_duration,
    estimate_range_duration,
    estimate_range_mode_pair,
    mode_pair_delay,
    pick_anchors,
)
from .synth import TimeSeries, synthesize
from .tfr import envelope, find_peaks, stft
from .warp import (
    Separation,
    WarpConfig,
    default_t_r,
    interception_window,
    ridge_table_rms,
    separate_modes,
)

log = logging.getLogger(__name__)

RIDGE_MATCH_HZ = 2.0
MIN_RIDGE_POINTS = 3

SUMMARY_FIELDS = [
    "range_km",
    "structure",
    "min_path_depth_m",
    "n_peaks",
    "duration_s",
    "v_start_mps",
    "v_end_mps",
    "range_a_km",
    "error_a",
    "delta_t12_s",
    "delay_source",
    "range_b_km",
    "error_b",
    "t_r_s",
    "n_components",
    "n_matched",
    "matched_modes",
]


class StageError(ModewarpError):
    """A pipeline stage failed; the message starts with the stage name."""

    def __init__(self, stage: str, err: Exception):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {err}")


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)

    def __exit__(self, typ, err, tb):
        if err is not None and not isinstance(err, StageError) and isinstance(err, (ModewarpError, ValueError)):
            raise StageError(self.name, err) from err
        return False


# -- building blocks -------------------------------------------------------


def table_for(cfg: RunConfig) -> DispersionTable:
    a = cfg.analysis
    lo, hi = a["band"]
    return dispersion_table(cfg.waveguide(), lo, hi, a["table_df"], int(a["max_modes"]), a["dz"])


def synthesize_range(cfg: RunConfig, range_m: float, min_depth_on_path=None, duration=None) -> TimeSeries:
    a = cfg.analysis
    return synthesize(
        cfg.waveguide(),
        cfg.scenario(range_m, duration),
        cfg.source(),
        tuple(a["band"]),
        max_modes=int(a["max_modes"]),
        dz=a["dz"],
        solve_df=a["solve_df"],
        min_depth_on_path=min_depth_on_path,
    )


def path_min_depth(cfg: RunConfig, range_m: float, transect=None):
    tr = transect if transect is not None else cfg.transect()
    if tr is None:
        return None
    return min_depth_over(tr, 0.0, range_m)


def duration_estimate(ts: TimeSeries, cfg: RunConfig, table: DispersionTable) -> RangeEstimate:
    """Method A on a waveform with the configured peak policy and speeds."""
    pol = cfg.duration_policy()
    env = envelope(ts, cfg.analysis["envelope_f_max"])
    peaks = find_peaks(env, pol.min_prominence, pol.min_separation)
    t_a, t_b = pick_anchors(peaks, pol)
    ds = cfg.analysis["duration_speeds"]
    sp = equivalent_speeds_duration(
        table,
        set(ds["mode_exclusions"]),
        None if ds.get("band") is None else tuple(ds["band"]),
        ds["aggregate"],
        cfg.waveguide().water_depth if ds.get("refracted_only") else None,
    )
    anchors = {"policy": pol.to_dict(), "t_start_s": t_a, "t_end_s": t_b, "n_peaks": len(peaks)}
    return estimate_range_duration(dispersion_duration(peaks, pol), sp, anchors, table.env_hash)


@dataclass
class SeparationResult:
    separation: Separation
    t_r: float
    window: tuple
    matches: list = field(default_factory=list)  # (component, mode, rms_hz, n_points)

    @property
    def matched_modes(self) -> list[int]:
        return sorted({m for _, m, rms, _ in self.matches if m is not None and rms <= RIDGE_MATCH_HZ})


def separate(ts: TimeSeries, cfg: RunConfig, t_r: float | None = None, window=None, bands=None) -> SeparationResult:
    """Default warping chain: envelope peaks -> t_r and window -> separation."""
    w = cfg.analysis["warp"]
    env = envelope(ts, cfg.analysis["envelope_f_max"])
    peaks = find_peaks(env)
    if t_r is None:
        t_r = w.get("t_r") or default_t_r(peaks, w.get("t_r_fraction", 0.1))
    if window is None:
        window = interception_window(peaks, w.get("shrink", 0.1))
    seg = ts.window(*window)
    wc = WarpConfig(float(t_r), w.get("output_fs"), w.get("guard", 0.05))
    sep = separate_modes(seg, wc, bands, f_max=cfg.analysis["band"][1], ridge_band=tuple(cfg.analysis["band"]))
    return SeparationResult(sep, float(t_r), tuple(window))


def match_ridges(res: SeparationResult, table: DispersionTable, range_m: float) -> SeparationResult:
    """Label each separated component with the table mode whose arrival curve its ridge tracks best."""
    out = []
    for i, comp in enumerate(res.separation, start=1):
        best = (None, float("inf"), 0)
        for j, lab in enumerate(table.labels):
            rms, n = ridge_table_rms(comp.ridge, table.frequencies, table.vg[j], range_m)
            if n >= MIN_RIDGE_POINTS and rms < best[1]:
                best = (int(lab), rms, n)
        out.append((i, *best))
    res.matches = out
    return res


def mode_pair_estimate(ts: TimeSeries, cfg: RunConfig, table: DispersionTable, sep: SeparationResult | None = None):
    """
    Method B. Uses the separated components matched to modes 1 and 2 when
    both are available, otherwise the raw-envelope anchors.
    """
    mp = cfg.analysis["mode_pair"]
    pol = cfg.mode_pair_policy()
    comps = {}
    if sep is not None:
        for i, m, rms, _ in sep.matches:
            if m in (1, 2) and rms <= RIDGE_MATCH_HZ and m not in comps:
                comps[m] = sep.separation[i - 1].signal
    if 1 in comps and 2 in comps:
        dt = mode_pair_delay([comps[1], comps[2]], pol)
        source = "separated"
    else:
        env = envelope(ts, cfg.analysis["envelope_f_max"])
        dt = mode_pair_delay(env, pol)
        source = "envelope"
    anchors = {"source": source, "policy": pol.to_dict()}
    est = estimate_range_mode_pair(dt, table, tuple(mp["band"]), float(mp["min_speed_difference"]), anchors)
    return est, source


# -- demonstration ---------------------------------------------------------


def _fmt(x, nd=6):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{x:.{nd}f}"


def write_summary(rows: list[dict], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow(
                [
                    _fmt(r["range_km"], 3),
                    r["structure"],
                    _fmt(r["min_path_depth_m"], 3),
                    r["n_peaks"],
                    _fmt(r["duration_s"]),
                    _fmt(r["v_start_mps"], 4),
                    _fmt(r["v_end_mps"], 4),
                    _fmt(r["range_a_km"], 3),
                    _fmt(r["error_a"]),
                    _fmt(r["delta_t12_s"]),
                    r["delay_source"] or "",
                    _fmt(r["range_b_km"], 3),
                    _fmt(r["error_b"]),
                    _fmt(r["t_r_s"]),
                    r["n_components"],
                    r["n_matched"],
                    " ".join(str(m) for m in r["matched_modes"]),
                ]
            )
    return path


def _write_arrivals(table, range_m, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "f_hz", "t_s"])
        for lab, f, t in plots.arrival_curves(table, range_m):
            for fi, ti in zip(f, t):
                w.writerow([lab, f"{fi:.6f}", f"{ti:.9f}"])


def run_range(cfg: RunConfig, table: DispersionTable, range_km: float, blocked: bool, transect, outdir: Path,
              make_plots: bool = True) -> dict:
    """Process one demo range; files go to ``outdir``."""
    outdir.mkdir(parents=True, exist_ok=True)
    r = range_km * 1e3
    md = None
    with _stage(f"transect@{range_km:g}km"):
        if blocked:
            md = path_min_depth(cfg, r, transect)
    with _stage(f"synthesis@{range_km:g}km"):
        ts = synthesize_range(cfg, r, md)
        ts.save_csv(outdir / "waveform.csv")
        ts.save_wav(outdir / "waveform.wav", {"range_m": r, "config_hash": cfg.config_hash})
    removed = False
    if md is not None:
        # Complete structure only if no tabulated entry turns below the path minimum.
        removed = bool(np.any(np.isfinite(table.turning) & (table.turning >= md)))
    row = {k: None for k in SUMMARY_FIELDS}
    row.update(range_km=range_km, structure="blocked" if removed else "complete", min_path_depth_m=md,
               matched_modes=[])
    with _stage(f"envelope@{range_km:g}km"):
        pol = cfg.duration_policy()
        env = envelope(ts, cfg.analysis["envelope_f_max"])
        peaks = find_peaks(env, pol.min_prominence, pol.min_separation)
        env.save_csv(outdir / "envelope.csv")
        row["n_peaks"] = len(peaks)
    if not removed:
        with _stage(f"method_a@{range_km:g}km"):
            ea = duration_estimate(ts, cfg, table)
            ea.save_json(outdir / "range_a.json")
            row.update(duration_s=ea.delta_t, v_start_mps=ea.speeds.v_start, v_end_mps=ea.speeds.v_end,
                       range_a_km=ea.range_m / 1e3, error_a=ea.relative_error(r))
    with _stage(f"separation@{range_km:g}km"):
        try:
            sep = match_ridges(separate(ts, cfg), table, r)
        except (WarpError, SeparationError) as e:
            log.warning("separation at %g km: %s", range_km, e)
            sep = None
        if sep is not None:
            sep.separation.save(outdir / "separation", {"config_hash": cfg.config_hash, "window_s": list(sep.window),
                                                        "matches": [list(m) for m in sep.matches]})
            row.update(t_r_s=sep.t_r, n_components=len(sep.separation), n_matched=len(sep.matched_modes),
                       matched_modes=sep.matched_modes)
        else:
            row.update(n_components=0, n_matched=0)
    with _stage(f"method_b@{range_km:g}km"):
        try:
            eb, source = mode_pair_estimate(ts, cfg, table, sep)
        except RangingError as e:
            log.warning("method B at %g km: %s", range_km, e)
        else:
            eb.save_json(outdir / "range_b.json")
            row.update(delta_t12_s=eb.delta_t, delay_source=source, range_b_km=eb.range_m / 1e3,
                       error_b=eb.relative_error(r))
    with _stage(f"spectrogram@{range_km:g}km"):
        wl = int(round(cfg.analysis["window_s"] * ts.fs))
        sp = stft(ts, wl, cfg.analysis["hop"])
        sp.save_csv(outdir / "spectrogram.csv")
        _write_arrivals(table, r, outdir / "arrivals.csv")
    if make_plots:
        with _stage(f"plots@{range_km:g}km"):
            title = f"{range_km:g} km ({row['structure']})"
            plots.plot_waveform(ts, outdir / "waveform.png", env, peaks, title)
            ridges = [m.ridge for m in sep.separation] if sep is not None else []
            plots.plot_spectrogram(sp, outdir / "spectrogram.png", table, r, ridges, title,
                                   cfg.analysis["band"][1])
            plots.plot_ridges(ridges, outdir / "ridges.png", table, r, title)
    return row


def run_demo(cfg: RunConfig, outdir, make_plots: bool = True) -> list[dict]:
    """
    Four-range demonstration. The configured (or fixture) transect blocks
    the ranges listed in ``demo.blocked_ranges_km``.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with _stage("transect"):
        transect = cfg.transect() or fixtures.seamount_transect()
    with _stage("dispersion"):
        table = table_for(cfg)
        table.save_csv(outdir / "dispersion.csv")
    blocked = {float(x) for x in cfg.data["demo"]["blocked_ranges_km"]}
    rows = []
    for rk in cfg.data["demo"]["ranges_km"]:
        rk = float(rk)
        rows.append(run_range(cfg, table, rk, rk in blocked, transect, outdir / f"r{rk:06.1f}km", make_plots))
    write_summary(rows, outdir / "summary.csv")
    if make_plots:
        plots.plot_dispersion(table, outdir / "dispersion.png", "group speed")
        plots.plot_estimates(rows, outdir / "estimates.png")
    write_manifest(cfg, outdir, "pipeline-demo")
    return rows


def write_manifest(cfg: RunConfig, outdir, command: str, name: str = "manifest.json", extra: dict | None = None) -> Path:
    """Sidecar listing every file under ``outdir`` with the config hash."""
    outdir = Path(outdir)
    own = outdir / name
    files = sorted(p.relative_to(outdir).as_posix() for p in outdir.rglob("*") if p.is_file() and p != own)
    man = {
        "command": command,
        "config_hash": cfg.config_hash,
        "config": cfg.hashable(),
        "files": files,
    }
    man.update(extra or {})
    path = own
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
