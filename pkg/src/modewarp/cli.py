"""
Command-line front end.

Every subcommand reads the same JSON configuration (``--config``), applies
flag overrides on top (flags win) and writes into ``--out``. Exit codes:
0 success, 1 computation error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, plots
from .config import ConfigError, RunConfig
from .errors import ModewarpError
from .modes import group_velocity_perturbation, solve_modes
from .synth import TimeSeries, load_timeseries_csv, load_wav
from .tfr import envelope, stft

log = logging.getLogger("modewarp")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- helpers ---------------------------------------------------------------


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            out[k.strip()] = v
    return out


def _overrides(args) -> dict:
    o = _parse_set(getattr(args, "set", None))
    if getattr(args, "ssp_csv", None):
        o["environment.ssp"] = {"csv": str(Path(args.ssp_csv).resolve())}
    if getattr(args, "transect", None):
        t = args.transect
        o["transect"] = t if t == "fixture" else str(Path(t).resolve())
    simple = {
        "range_km": ("scenario.range_m", lambda x: x * 1e3),
        "duration": ("scenario.duration", None),
        "source_depth": ("scenario.source_depth", None),
        "receiver_depth": ("scenario.receiver_depth", None),
        "sample_rate": ("scenario.sample_rate", None),
        "max_modes": ("analysis.max_modes", None),
        "dz": ("analysis.dz", None),
        "window_s": ("analysis.window_s", None),
        "df": ("analysis.table_df", None),
        "seed": ("seed", None),
    }
    for attr, (key, fn) in simple.items():
        v = getattr(args, attr, None)
        if v is not None:
            o[key] = fn(v) if fn else v
    if getattr(args, "band", None):
        o["analysis.band"] = list(args.band)
    if getattr(args, "out", None):
        o["output_dir"] = args.out
    return o


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config, _overrides(args))


def _outdir(cfg: RunConfig) -> Path:
    p = cfg.output_dir
    p.mkdir(parents=True, exist_ok=True)
    return p


def _read_input(path) -> TimeSeries:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    if p.suffix.lower() == ".wav":
        return load_wav(p)
    if p.suffix.lower() == ".csv":
        return load_timeseries_csv(p)
    raise UsageError(f"unsupported input type {p.suffix!r}; expected .csv or .wav")


def _input_or_synth(args, cfg: RunConfig) -> TimeSeries:
    from .pipeline import path_min_depth, synthesize_range

    if args.input:
        return _read_input(args.input)
    r = cfg.scenario().range
    return synthesize_range(cfg, r, path_min_depth(cfg, r))


def _done(cfg, out, command, extra=None):
    from .pipeline import write_manifest

    write_manifest(cfg, out, command, f"{command}.manifest.json", extra)
    return EXIT_OK


# -- subcommands -----------------------------------------------------------


def cmd_modes(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    wg = cfg.waveguide()
    freqs = args.frequencies or cfg.analysis["mode_frequencies"]
    counts = {}
    for f in freqs:
        ms = group_velocity_perturbation(solve_modes(wg, float(f), int(cfg.analysis["max_modes"]), cfg.analysis["dz"]), wg)
        stem = f"modes_{float(f):g}Hz"
        ms.save_json(out / f"{stem}.json", include_psi=not args.no_psi)
        ms.save_eigenfunction_csv(out / f"eigenfunctions_{float(f):g}Hz.csv")
        if not args.no_plots:
            plots.plot_eigenfunctions(ms, out / f"eigenfunctions_{float(f):g}Hz.png", args.plot_depth, f"{f:g} Hz")
        counts[f"{float(f):g}"] = len(ms)
        flag = " (below cutoff)" if ms.below_cutoff else ""
        print(f"{f:g} Hz: {len(ms)} modes{flag}")
    return _done(cfg, out, "modes", {"mode_counts": counts})


def cmd_dispersion(args) -> int:
    from .pipeline import table_for

    cfg = _load_config(args)
    out = _outdir(cfg)
    table = table_for(cfg)
    table.save_csv(out / "dispersion.csv")
    if not args.no_plots:
        plots.plot_dispersion(table, out / "dispersion.png", "group speed")
    print(f"{table.n_modes} modes over {table.frequencies[0]:g}-{table.frequencies[-1]:g} Hz")
    return _done(cfg, out, "dispersion")


def cmd_synth(args) -> int:
    from .pipeline import path_min_depth, synthesize_range

    cfg = _load_config(args)
    out = _outdir(cfg)
    r = cfg.scenario().range
    md = path_min_depth(cfg, r)
    ts = synthesize_range(cfg, r, md)
    ts.save_csv(out / "waveform.csv")
    ts.save_wav(out / "waveform.wav", {"range_m": r, "min_path_depth_m": md, "config_hash": cfg.config_hash})
    if not args.no_plots:
        plots.plot_waveform(ts, out / "waveform.png", title=f"{r / 1e3:g} km")
    print(f"{len(ts)} samples at {ts.fs:g} Hz from t0={ts.t0:.3f} s")
    return _done(cfg, out, "synth", {"min_path_depth_m": md})


def cmd_spectrogram(args) -> int:
    from .pipeline import table_for

    cfg = _load_config(args)
    out = _outdir(cfg)
    ts = _input_or_synth(args, cfg)
    wl = int(round(cfg.analysis["window_s"] * ts.fs))
    sp = stft(ts, wl, args.hop)
    sp.save_csv(out / "spectrogram.csv")
    if not args.no_plots:
        table, r = None, None
        if args.overlay:
            table, r = table_for(cfg), cfg.scenario().range
        plots.plot_spectrogram(sp, out / "spectrogram.png", table, r, f_max=cfg.analysis["band"][1])
    print(f"{sp.times.size} frames x {sp.frequencies.size} bins")
    return _done(cfg, out, "spectrogram")


def _parse_bands(items):
    from .warp import ModeBand

    bands = []
    for it in items or ():
        try:
            c, hw = (float(x) for x in it.split(":"))
        except ValueError:
            raise UsageError(f"--bands expects CENTER:HALFWIDTH, got {it!r}") from None
        bands.append(ModeBand(c, hw))
    return bands or None


def cmd_separate(args) -> int:
    from .pipeline import match_ridges, separate, table_for

    cfg = _load_config(args)
    out = _outdir(cfg)
    ts = _input_or_synth(args, cfg)
    res = separate(ts, cfg, args.t_r, tuple(args.window) if args.window else None, _parse_bands(args.bands))
    meta = {"config_hash": cfg.config_hash, "window_s": list(res.window)}
    if args.match:
        res = match_ridges(res, table_for(cfg), cfg.scenario().range)
        meta["matches"] = [list(m) for m in res.matches]
    res.separation.save(out / "separation", meta)
    if not args.no_plots:
        plots.plot_ridges([m.ridge for m in res.separation], out / "ridges.png")
    print(f"{len(res.separation)} components, t_r={res.t_r:.3f} s")
    return _done(cfg, out, "separate")


def cmd_range_a(args) -> int:
    from .pipeline import duration_estimate, table_for

    cfg = _load_config(args)
    out = _outdir(cfg)
    ts = _input_or_synth(args, cfg)
    est = duration_estimate(ts, cfg, table_for(cfg))
    est.save_json(out / "range_a.json")
    print(f"duration {est.delta_t:.4f} s -> range {est.range_m / 1e3:.2f} km")
    return _done(cfg, out, "range-a")


def cmd_range_b(args) -> int:
    from .pipeline import table_for
    from .ranging import estimate_range_mode_pair, mode_pair_delay

    cfg = _load_config(args)
    out = _outdir(cfg)
    pol = cfg.mode_pair_policy()
    if args.modes:
        src = [_read_input(p) for p in args.modes]
        dt = mode_pair_delay(src, pol)
        source = "separated"
    else:
        ts = _input_or_synth(args, cfg)
        dt = mode_pair_delay(envelope(ts, cfg.analysis["envelope_f_max"]), pol)
        source = "envelope"
    mp = cfg.analysis["mode_pair"]
    est = estimate_range_mode_pair(
        dt, table_for(cfg), tuple(mp["band"]), float(mp["min_speed_difference"]),
        {"source": source, "policy": pol.to_dict()},
    )
    est.save_json(out / "range_b.json")
    print(f"mode delay {est.delta_t:.4f} s -> range {est.range_m / 1e3:.2f} km")
    return _done(cfg, out, "range-b")


def cmd_pipeline_demo(args) -> int:
    from .pipeline import run_demo

    cfg = _load_config(args)
    out = _outdir(cfg)
    rows = run_demo(cfg, out, make_plots=not args.no_plots)
    for r in rows:
        a = "-" if r["range_a_km"] is None else f"{r['range_a_km']:.1f}"
        b = "-" if r["range_b_km"] is None else f"{r['range_b_km']:.1f}"
        print(f"{r['range_km']:7.1f} km  {r['structure']:8s}  A={a:>7s} km  B={b:>7s} km")
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _common(p, scenario=True, inp=False):
    g = p.add_argument_group("configuration")
    g.add_argument("-c", "--config", help="JSON run configuration (defaults used when omitted)")
    g.add_argument("-o", "--out", help="output directory (config: output_dir)")
    g.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config value by dotted path; VALUE is parsed as JSON when possible")
    g.add_argument("--ssp-csv", help="sound-speed profile CSV (depth_m,speed_mps)")
    g.add_argument("--max-modes", type=int, help="modes solved per frequency")
    g.add_argument("--dz", type=float, help="eigenproblem grid step (m)")
    g.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), help="analysis band (Hz)")
    g.add_argument("--no-plots", action="store_true", help="skip PNG output")
    if scenario:
        s = p.add_argument_group("scenario")
        s.add_argument("--range-km", type=float, help="source-receiver range (km)")
        s.add_argument("--duration", type=float, help="record length (s)")
        s.add_argument("--source-depth", type=float, help="source depth (m)")
        s.add_argument("--receiver-depth", type=float, help="receiver depth (m)")
        s.add_argument("--sample-rate", type=float, help="sample rate (Hz)")
        s.add_argument("--transect", help="bathymetry CSV (range_m,depth_m) or 'fixture'; blocks modes by path depth")
    if inp:
        p.add_argument("-i", "--input", help="waveform .csv or .wav; synthesized from the scenario when omitted")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modewarp", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("modes", help="solve modes at given frequencies; ModeSet JSON and eigenfunction CSV")
    _common(p, scenario=False)
    p.add_argument("-f", "--frequencies", type=float, nargs="+", help="frequencies (Hz)")
    p.add_argument("--no-psi", action="store_true", help="omit eigenfunctions from the JSON export")
    p.add_argument("--plot-depth", type=float, default=600.0, help="depth limit of the eigenfunction plot (m)")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("dispersion", help="tracked group-speed table over the analysis band")
    _common(p, scenario=False)
    p.add_argument("--df", type=float, help="frequency step (Hz)")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("synth", help="synthesize the received waveform (CSV and WAV)")
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrogram", help="STFT magnitude of a waveform")
    _common(p, inp=True)
    p.add_argument("--window-s", type=float, help="STFT window (s)")
    p.add_argument("--hop", type=int, help="STFT hop (samples)")
    p.add_argument("--overlay", action="store_true", help="draw modal arrival curves for the scenario range")
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("separate", help="warping mode separation and ridge extraction")
    _common(p, inp=True)
    p.add_argument("--t-r", type=float, help="warping reference time (s); default from envelope peaks")
    p.add_argument("--window", type=float, nargs=2, metavar=("T_A", "T_B"), help="interception window (s)")
    p.add_argument("--bands", nargs="+", metavar="C:HW", help="warped-domain bands; detected when omitted")
    p.add_argument("--match", action="store_true", help="label components against the dispersion table")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("range-a", help="range from dispersion duration")
    _common(p, inp=True)
    p.set_defaults(func=cmd_range_a)

    p = sub.add_parser("range-b", help="range from the mode-1/mode-2 delay")
    _common(p, inp=True)
    p.add_argument("--modes", nargs=2, metavar=("MODE1", "MODE2"), help="separated mode-1 and mode-2 waveforms")
    p.set_defaults(func=cmd_range_b)

    p = sub.add_parser("pipeline-demo", help="four-range demonstration with seamount blocking")
    _common(p, scenario=False)
    p.add_argument("--transect", help="bathymetry CSV overriding the built-in seamount")
    p.set_defaults(func=cmd_pipeline_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        ap.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ModewarpError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
