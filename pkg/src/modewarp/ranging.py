"""
Single-receiver range estimators.

Method A (duration): the spread of the dispersion structure between two
envelope-peak anchors, converted with equivalent start/end group speeds.
Method B (mode pair): the mode-1/mode-2 arrival difference, converted with
band-averaged group speeds of those two modes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RangingError
from .modes import DispersionTable
from .synth import TimeSeries
from .tfr import Envelope, PeakList, envelope, find_peaks

DEFAULT_MODE_PAIR_BAND = (30.0, 80.0)
MIN_MODE_SEPARATION = 1.0  # m/s


class Anchor(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"
    PENULTIMATE = "penultimate"
    LAST = "last"

    def index(self, n: int) -> int:
        return {"first": 0, "second": 1, "penultimate": n - 2, "last": n - 1}[self.value]


@dataclass(frozen=True)
class PeakPolicy:
    """Which envelope peaks bound a duration, and how peaks are detected."""

    start: Anchor = Anchor.SECOND
    end: Anchor = Anchor.LAST
    min_prominence: float = 0.1
    min_separation: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "start", Anchor(self.start))
        object.__setattr__(self, "end", Anchor(self.end))

    def to_dict(self) -> dict:
        return {
            "start": self.start.value,
            "end": self.end.value,
            "min_prominence": self.min_prominence,
            "min_separation": self.min_separation,
        }


class RangeMethod(str, enum.Enum):
    DURATION = "duration"
    MODE_PAIR = "mode_pair"


@dataclass(frozen=True)
class EquivalentSpeeds:
    """
    Speeds used to turn a time difference into range.

    Method A fills ``v_start``/``v_end``; method B fills
    ``v_mode1``/``v_mode2`` and ``band``.
    """

    v_start: float | None = None
    v_end: float | None = None
    v_mode1: float | None = None
    v_mode2: float | None = None
    band: tuple | None = None
    modes: tuple = ()

    def __post_init__(self):
        a = self.v_start is not None or self.v_end is not None
        b = self.v_mode1 is not None or self.v_mode2 is not None
        if a == b:
            raise RangingError("give either (v_start, v_end) or (v_mode1, v_mode2)")
        pair = (self.v_start, self.v_end) if a else (self.v_mode1, self.v_mode2)
        if any(v is None or not np.isfinite(v) or v <= 0 for v in pair):
            raise RangingError(f"speeds must be finite and positive, got {pair}")

    @property
    def method(self) -> RangeMethod:
        return RangeMethod.DURATION if self.v_start is not None else RangeMethod.MODE_PAIR

    @property
    def slowness_difference(self) -> float:
        """1/v_slow - 1/v_fast in s/m (may be <= 0 for unusable speeds)."""
        if self.method is RangeMethod.DURATION:
            return 1.0 / self.v_end - 1.0 / self.v_start
        return 1.0 / self.v_mode2 - 1.0 / self.v_mode1

    def to_dict(self) -> dict:
        d = {"method": self.method.value}
        if self.method is RangeMethod.DURATION:
            d.update(v_start_mps=self.v_start, v_end_mps=self.v_end)
        else:
            d.update(v_mode1_mps=self.v_mode1, v_mode2_mps=self.v_mode2)
        if self.band is not None:
            d["band_hz"] = list(self.band)
        if self.modes:
            d["modes"] = list(self.modes)
        return d


@dataclass(frozen=True)
class RangeEstimate:
    range_m: float
    delta_t: float
    speeds: EquivalentSpeeds
    method: RangeMethod
    anchors: dict = field(default_factory=dict)
    env_hash: str | None = None

    def __post_init__(self):
        if self.delta_t < 0 or self.range_m < 0:
            raise RangingError("range and delta_t must be non-negative")

    def relative_error(self, true_range: float) -> float:
        return abs(self.range_m - true_range) / true_range

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "delta_t_s": self.delta_t,
            "range_m": self.range_m,
            "speeds": self.speeds.to_dict(),
            "anchors": self.anchors,
            "env_hash": self.env_hash,
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _as_peaks(src, policy: PeakPolicy) -> PeakList:
    if isinstance(src, PeakList):
        return src
    if isinstance(src, Envelope):
        return find_peaks(src, policy.min_prominence, policy.min_separation)
    if isinstance(src, TimeSeries):
        return find_peaks(envelope(src), policy.min_prominence, policy.min_separation)
    raise TypeError(f"expected Envelope, TimeSeries or PeakList, got {type(src).__name__}")


def pick_anchors(peaks: PeakList, policy: PeakPolicy = PeakPolicy()) -> tuple[float, float]:
    """Absolute times of the start and end anchors chosen by ``policy``."""
    n = len(peaks)
    i, j = policy.start.index(n), policy.end.index(n)
    if not 0 <= i < j < n:
        raise RangingError(
            f"{n} envelope peaks are too few for a {policy.start.value}-to-{policy.end.value} duration"
        )
    return peaks[i].time, peaks[j].time


def dispersion_duration(src, policy: PeakPolicy = PeakPolicy()) -> float:
    """
    Duration of the dispersion structure between two envelope-peak anchors.

    ``src`` may be an Envelope, a TimeSeries (enveloped with defaults) or
    an already detected PeakList.
    """
    t_a, t_b = pick_anchors(_as_peaks(src, policy), policy)
    return t_b - t_a


def equivalent_speeds_duration(
    table: DispersionTable,
    mode_exclusions=frozenset({1}),
    band=None,
    aggregate: str = "mean",
    max_turning_depth: float | None = None,
) -> EquivalentSpeeds:
    """
    Equivalent start and end group speeds for the duration method.

    Per included mode the extreme group speeds over ``band`` are taken;
    ``aggregate="mean"`` averages them across modes, ``"extreme"`` takes
    the fastest maximum and slowest minimum. With ``max_turning_depth``
    only entries whose turning depth lies above it (refracted entries)
    count.
    """
    if aggregate not in ("mean", "extreme"):
        raise ValueError("aggregate must be 'mean' or 'extreme'")
    if table.frequencies.size == 0 or table.n_modes == 0:
        raise RangingError("empty dispersion table")
    lo, hi = band if band is not None else (table.frequencies[0], table.frequencies[-1])
    sel = (table.frequencies >= lo - 1e-9) & (table.frequencies <= hi + 1e-9)
    if not np.any(sel):
        raise RangingError(f"band {lo:g}-{hi:g} Hz holds no table frequencies")
    vg = table.vg[:, sel].copy()
    if max_turning_depth is not None:
        vg[~(table.turning[:, sel] < max_turning_depth)] = np.nan
    rows = [i for i, lab in enumerate(table.labels) if int(lab) not in set(mode_exclusions)]
    vmax, vmin, used = [], [], []
    for i in rows:
        v = vg[i][np.isfinite(vg[i])]
        if v.size:
            vmax.append(v.max())
            vmin.append(v.min())
            used.append(int(table.labels[i]))
    if not used:
        raise RangingError("no modes left in band after exclusions")
    if aggregate == "mean":
        vs, ve = float(np.mean(vmax)), float(np.mean(vmin))
    else:
        vs, ve = float(np.max(vmax)), float(np.min(vmin))
    return EquivalentSpeeds(v_start=vs, v_end=ve, band=(float(lo), float(hi)), modes=tuple(used))


def estimate_range_duration(
    delta_t: float,
    sp: EquivalentSpeeds,
    anchors: dict | None = None,
    env_hash: str | None = None,
) -> RangeEstimate:
    """r = delta_t / (1/v_end - 1/v_start)."""
    if sp.method is not RangeMethod.DURATION:
        raise RangingError("duration method needs v_start/v_end speeds")
    if not sp.v_start > sp.v_end:
        raise RangingError(f"need v_start > v_end, got {sp.v_start:.3f} <= {sp.v_end:.3f}")
    if delta_t < 0:
        raise RangingError("delta_t must be non-negative")
    r = delta_t / sp.slowness_difference
    return RangeEstimate(float(r), float(delta_t), sp, RangeMethod.DURATION, dict(anchors or {}), env_hash)


def _peak_time(ts: TimeSeries) -> float:
    env = envelope(ts)
    if not np.any(env.values > 0):
        raise RangingError("separated mode is silent")
    return float(env.times[int(np.argmax(env.values))])


def mode_pair_delay(src, policy: PeakPolicy | None = None) -> float:
    """
    Positive mode-1/mode-2 arrival difference.

    ``src`` is either a pair of separated mode signals (mode 1, mode 2),
    whose envelope maxima are compared, or an Envelope/TimeSeries/PeakList
    from which two anchors are picked (default: the last two peaks).
    """
    if isinstance(src, Sequence) and not isinstance(src, PeakList):
        if len(src) != 2:
            raise RangingError("need exactly two separated modes")
        t1, t2 = (_peak_time(x) for x in src)
        sep = (policy or PeakPolicy()).min_separation
    else:
        policy = policy or PeakPolicy(Anchor.PENULTIMATE, Anchor.LAST)
        t1, t2 = pick_anchors(_as_peaks(src, policy), policy)
        sep = policy.min_separation
    dt = abs(t1 - t2)
    if dt < sep:
        raise RangingError(f"mode arrivals {dt:.4f} s apart are indistinguishable")
    return dt


def mode_pair_speeds(
    table: DispersionTable,
    band=DEFAULT_MODE_PAIR_BAND,
    min_separation: float = MIN_MODE_SEPARATION,
) -> EquivalentSpeeds:
    """
    Band-mean group speeds of modes 1 and 2.

    Refuses (RangingError) unless mode 1 is faster than mode 2 by at
    least ``min_separation`` m/s, i.e. unless the table shows the
    two-duct ordering the method relies on.
    """
    lo, hi = band
    sel = (table.frequencies >= lo - 1e-9) & (table.frequencies <= hi + 1e-9)
    if not np.any(sel):
        raise RangingError(f"band {lo:g}-{hi:g} Hz holds no table frequencies")
    labels = [int(x) for x in table.labels]
    if 1 not in labels or 2 not in labels:
        raise RangingError("modes 1 and 2 must both be in the table")
    v1 = table.vg[labels.index(1), sel]
    v2 = table.vg[labels.index(2), sel]
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise RangingError(f"modes 1 and 2 are not present across {lo:g}-{hi:g} Hz")
    m1, m2 = float(v1.mean()), float(v2.mean())
    if m1 - m2 < min_separation:
        raise RangingError(
            f"mode-1/mode-2 band speeds {m1:.2f}/{m2:.2f} m/s are not separated by "
            f">= {min_separation:g} m/s with mode 1 faster; the mode-pair method needs a dual-channel profile"
        )
    return EquivalentSpeeds(v_mode1=m1, v_mode2=m2, band=(float(lo), float(hi)), modes=(1, 2))


def estimate_range_mode_pair(
    delta_t12: float,
    table: DispersionTable,
    band=DEFAULT_MODE_PAIR_BAND,
    min_separation: float = MIN_MODE_SEPARATION,
    anchors: dict | None = None,
) -> RangeEstimate:
    """r = delta_t12 / (1/v2 - 1/v1) with band-mean speeds of modes 1 and 2."""
    if delta_t12 < 0:
        raise RangingError("delta_t12 must be non-negative")
    sp = mode_pair_speeds(table, band, min_separation)
    r = delta_t12 / sp.slowness_difference
    return RangeEstimate(float(r), float(delta_t12), sp, RangeMethod.MODE_PAIR, dict(anchors or {}), table.env_hash)
