"""
Run configuration: one JSON schema, defaults, flag overrides, eager
validation with an aggregated error report, and a stable hash.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from . import fixtures
from .env import (
    BathymetryTransect,
    BottomModel,
    DualChannelParams,
    Waveguide,
    build_dual_channel_ssp,
    load_ssp_csv,
    load_transect_csv,
)
from .errors import ModewarpError
from .ranging import Anchor, PeakPolicy
from .synth import Scenario, SourceWavelet, WaveletKind


class ConfigError(ModewarpError, ValueError):
    """Configuration is unusable; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


DEFAULTS: dict = {
    "environment": {
        "ssp": {"fixture": "dual_channel"},
        "water_depth": fixtures.WATER_DEPTH,
        "water_density": 1000.0,
        "ssp_dz": 1.0,
        "bottom": {
            "model": "halfspace",
            "speed": fixtures.BOTTOM_SPEED,
            "density": fixtures.BOTTOM_DENSITY,
            "attenuation": fixtures.BOTTOM_ATTENUATION,
        },
    },
    "scenario": {
        "source_depth": fixtures.SOURCE_DEPTH,
        "receiver_depth": fixtures.RECEIVER_DEPTH,
        "range_m": 200e3,
        "sample_rate": 250.0,
        "duration": None,
    },
    "source": {"kind": "ricker", "center_frequency": 40.0, "bandwidth": None, "amplitude": 1.0},
    "analysis": {
        "band": [10.0, 100.0],
        "max_modes": 10,
        "dz": 1.4,
        "solve_df": 0.25,
        "mode_frequencies": [20.0, 70.0],
        "table_df": 0.5,
        "window_s": 0.2,
        "hop": None,
        "envelope_f_max": 100.0,
        "duration_policy": dict(fixtures.DURATION_POLICY),
        "duration_speeds": dict(fixtures.DURATION_SPEEDS),
        "mode_pair": dict(fixtures.MODE_PAIR),
        "warp": dict(fixtures.WARP),
    },
    "transect": None,
    "demo": {
        "ranges_km": [200.0, 300.0, 400.0, 518.0],
        "blocked_ranges_km": [300.0, 400.0],
    },
    "output_dir": "out",
    "seed": 0,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "ssp":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(cfg: dict, dotted: str, value) -> None:
    """Set ``cfg['a']['b'] = value`` for ``dotted='a.b'``."""
    keys = dotted.split(".")
    d = cfg
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


class RunConfig:
    """
    Resolved configuration.

    ``data`` holds the plain JSON-compatible dict; typed accessors build
    domain objects from it. Relative CSV paths resolve against ``base_dir``
    (the config file's directory, or the working directory).
    """

    def __init__(self, data: dict, base_dir: Path | None = None):
        self.data = data
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        self._wg = None
        self._transect = None
        self.validate()

    # construction -------------------------------------------------------
    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        base = None
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError([f"config file not found: {p}"])
            try:
                user = json.loads(p.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError([f"{p}: invalid JSON ({e})"]) from None
            if not isinstance(user, dict):
                raise ConfigError([f"{p}: top level must be an object"])
            unknown = sorted(set(user) - set(DEFAULTS))
            if unknown:
                raise ConfigError([f"unknown top-level key(s): {', '.join(unknown)}"])
            data = _merge(data, user)
            base = p.parent
        for k, v in (overrides or {}).items():
            if v is not None:
                set_path(data, k, v)
        return cls(data, base)

    def _path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    # validation ---------------------------------------------------------
    def validate(self) -> None:
        problems = []

        def check(fn, label):
            try:
                fn()
            except ConfigError as e:
                problems.extend(e.problems)
            except (ModewarpError, ValueError, TypeError, KeyError) as e:
                problems.append(f"{label}: {e}")

        check(self.waveguide, "environment")
        check(self.source, "source")
        check(self._check_scenario, "scenario")
        check(self._check_analysis, "analysis")
        check(self.transect, "transect")
        if problems:
            raise ConfigError(problems)

    def _check_scenario(self):
        s = self.data["scenario"]
        for k in ("source_depth", "receiver_depth", "range_m", "sample_rate"):
            if not isinstance(s.get(k), (int, float)) or s[k] <= 0:
                raise ValueError(f"scenario.{k} must be a positive number")
        if s.get("duration") is not None and s["duration"] <= 0:
            raise ValueError("scenario.duration must be positive")
        wd = self.data["environment"]["water_depth"]
        for k in ("source_depth", "receiver_depth"):
            if s[k] >= wd:
                raise ValueError(f"scenario.{k}={s[k]} must lie above the bottom ({wd} m)")

    def _check_analysis(self):
        a = self.data["analysis"]
        lo, hi = a["band"]
        if not 0 < lo < hi:
            raise ValueError("analysis.band must satisfy 0 < lo < hi")
        if hi >= self.data["scenario"]["sample_rate"] / 2:
            raise ValueError("analysis.band upper edge must lie below Nyquist")
        if int(a["max_modes"]) < 1:
            raise ValueError("analysis.max_modes must be >= 1")
        if a["solve_df"] is not None and a["solve_df"] <= 0:
            raise ValueError("analysis.solve_df must be positive or null")
        if a["table_df"] <= 0:
            raise ValueError("analysis.table_df must be positive")
        if a["dz"] is not None and a["dz"] <= 0:
            raise ValueError("analysis.dz must be positive or null")
        self.duration_policy()
        self.mode_pair_policy()
        mp = a["mode_pair"]
        if mp["min_speed_difference"] < 0:
            raise ValueError("analysis.mode_pair.min_speed_difference must be non-negative")
        blo, bhi = mp["band"]
        if not 0 < blo < bhi:
            raise ValueError("analysis.mode_pair.band must satisfy 0 < lo < hi")
        if a["duration_speeds"]["aggregate"] not in ("mean", "extreme"):
            raise ValueError("analysis.duration_speeds.aggregate must be 'mean' or 'extreme'")
        g = a["warp"]
        if g.get("guard", 0.05) <= 0:
            raise ValueError("analysis.warp.guard must be positive")

    # typed accessors ----------------------------------------------------
    def waveguide(self) -> Waveguide:
        if self._wg is not None:
            return self._wg
        e = self.data["environment"]
        ssp_spec = e["ssp"]
        depth = float(e["water_depth"])
        if "csv" in ssp_spec:
            p = self._path(ssp_spec["csv"])
            if not p.is_file():
                raise ConfigError([f"SSP file not found: {p}"])
            ssp = load_ssp_csv(p)
        elif "dual_channel" in ssp_spec:
            ssp = build_dual_channel_ssp(DualChannelParams(**ssp_spec["dual_channel"]), depth, float(e["ssp_dz"]))
        elif "fixture" in ssp_spec:
            ssp = fixtures.ssp(ssp_spec["fixture"], depth, float(e["ssp_dz"]))
        else:
            raise ConfigError(["environment.ssp needs one of 'csv', 'dual_channel', 'fixture'"])
        b = e["bottom"]
        self._wg = Waveguide(
            ssp,
            depth,
            water_density=float(e["water_density"]),
            bottom_speed=float(b["speed"]),
            bottom_density=float(b["density"]),
            bottom_attenuation=float(b["attenuation"]),
            bottom_model=BottomModel(b["model"]),
        )
        return self._wg

    def transect(self) -> BathymetryTransect | None:
        t = self.data.get("transect")
        if t is None:
            return None
        if self._transect is None:
            if t == "fixture":
                self._transect = fixtures.seamount_transect()
            else:
                p = self._path(t)
                if not p.is_file():
                    raise ConfigError([f"transect file not found: {p}"])
                self._transect = load_transect_csv(p)
        return self._transect

    def source(self) -> SourceWavelet:
        s = self.data["source"]
        return SourceWavelet(
            WaveletKind(s["kind"]),
            float(s["center_frequency"]),
            None if s.get("bandwidth") is None else float(s["bandwidth"]),
            float(s["amplitude"]),
        )

    def scenario(self, range_m: float | None = None, duration: float | None = None) -> Scenario:
        s = self.data["scenario"]
        r = float(range_m if range_m is not None else s["range_m"])
        dur = duration if duration is not None else s.get("duration")
        if dur is None:
            dur = fixtures.default_duration(r)
        return Scenario(float(s["source_depth"]), float(s["receiver_depth"]), r, float(s["sample_rate"]), float(dur))

    @property
    def analysis(self) -> dict:
        return self.data["analysis"]

    def duration_policy(self) -> PeakPolicy:
        p = self.analysis["duration_policy"]
        return PeakPolicy(Anchor(p["start"]), Anchor(p["end"]), float(p["min_prominence"]), float(p["min_separation"]))

    def mode_pair_policy(self) -> PeakPolicy:
        p = self.analysis["mode_pair"]
        return PeakPolicy(Anchor(p["start"]), Anchor(p["end"]), float(p["min_prominence"]), float(p["min_separation"]))

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output_dir"])

    # identity -----------------------------------------------------------
    def hashable(self) -> dict:
        d = copy.deepcopy(self.data)
        d.pop("output_dir", None)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
