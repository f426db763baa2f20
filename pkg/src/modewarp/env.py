"""
Ocean environment description: sound speed profiles, waveguides and
bathymetry transects.

Depth ``z`` is measured positive downward from the sea surface, in metres.
All objects are immutable after construction.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CSVParseError, DuplicateDepth, InvariantError, RangeOutsideTransect

SPEED_BOUNDS = (1300.0, 1700.0)

SSP_HEADER = ("depth_m", "speed_mps")
TRANSECT_HEADER = ("range_m", "depth_m")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SoundSpeedProfile:
    """
    Depth-sampled sound speed c(z).

    Between samples the speed is linearly interpolated; below the last
    sample it is held constant. Depths above the surface are undefined.
    """

    depths: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        z = _frozen(self.depths)
        c = _frozen(self.speeds)
        object.__setattr__(self, "depths", z)
        object.__setattr__(self, "speeds", c)
        if z.ndim != 1 or z.shape != c.shape:
            raise InvariantError("depths and speeds must be 1-D arrays of equal length")
        if z.size < 2:
            raise InvariantError("a profile needs at least 2 samples")
        if z[0] != 0.0:
            raise InvariantError(f"first depth must be 0, got {z[0]:g}")
        if np.any(np.diff(z) <= 0):
            raise InvariantError("depths must be strictly increasing")
        if not np.all(np.isfinite(c)):
            raise InvariantError("speeds must be finite")
        lo, hi = SPEED_BOUNDS
        bad = (c < lo) | (c > hi)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvariantError(
                f"speed {c[i]:g} m/s at depth {z[i]:g} m outside [{lo:g}, {hi:g}]"
            )

    def __eq__(self, other):
        if not isinstance(other, SoundSpeedProfile):
            return NotImplemented
        return np.array_equal(self.depths, other.depths) and np.array_equal(
            self.speeds, other.speeds
        )

    __hash__ = None

    def speed_at(self, z) -> np.ndarray:
        """Sound speed at depth(s) ``z`` (constant extrapolation at depth)."""
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise ValueError("sound speed is undefined above the surface")
        return np.interp(z, self.depths, self.speeds)

    @property
    def min_speed(self) -> float:
        return float(self.speeds.min())

    @property
    def max_speed(self) -> float:
        return float(self.speeds.max())

    def local_minima(self) -> np.ndarray:
        """Depths of interior strict local minima of the sampled speeds."""
        return self.depths[_local_minima_index(self.speeds)]


def _local_minima_index(c: np.ndarray) -> np.ndarray:
    # plateau-aware: a run of equal values counts once, at its first sample
    keep = np.r_[True, np.diff(c) != 0]
    idx = np.flatnonzero(keep)
    v = c[idx]
    if v.size < 3:
        return np.array([], dtype=int)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])
    return idx[1:-1][inner]


@dataclass(frozen=True)
class DualChannelParams:
    """
    Gaussian-duct parameterisation of a dual-channel profile.

    The background is a linear upward-refracting profile; each duct
    subtracts a Gaussian depression of given strength (m/s) centred at
    its depth with the given 1/e half-width (m).
    """

    surface_speed: float = 1435.0
    surface_gradient: float = 0.016
    duct1_depth: float = 60.0
    duct2_depth: float = 200.0
    duct1_strength: float = 3.0
    duct2_strength: float = 6.0
    duct_width1: float = 30.0
    duct_width2: float = 80.0

    def __post_init__(self):
        if not 0 < self.duct1_depth < self.duct2_depth:
            raise InvariantError("require 0 < duct1_depth < duct2_depth")
        if self.duct1_strength < 0 or self.duct2_strength < 0:
            raise InvariantError("duct strengths must be >= 0")
        if self.duct_width1 <= 0 or self.duct_width2 <= 0:
            raise InvariantError("duct widths must be > 0")
        if self.surface_gradient <= 0:
            raise InvariantError("surface_gradient must be positive")

    def speed(self, z) -> np.ndarray:
        """Closed-form c(z) of the parameterisation."""
        z = np.asarray(z, dtype=float)
        c = self.surface_speed + self.surface_gradient * z
        c = c - self.duct1_strength * np.exp(-(((z - self.duct1_depth) / self.duct_width1) ** 2))
        c = c - self.duct2_strength * np.exp(-(((z - self.duct2_depth) / self.duct_width2) ** 2))
        return c


def build_dual_channel_ssp(
    params: DualChannelParams, max_depth: float, dz: float
) -> SoundSpeedProfile:
    """Sample the dual-channel parameterisation on ``[0, max_depth]`` at step ``dz``."""
    if dz <= 0:
        raise InvariantError("dz must be positive")
    if max_depth <= params.duct2_depth:
        raise InvariantError("max_depth must exceed duct2_depth")
    n = int(np.floor(max_depth / dz + 1e-9))
    z = np.arange(n + 1) * dz
    if z[-1] < max_depth - 1e-9:
        z = np.r_[z, max_depth]
    return SoundSpeedProfile(z, params.speed(z))


def load_ssp_csv(path) -> SoundSpeedProfile:
    """
    Read a ``depth_m,speed_mps`` CSV file.

    Rows are sorted by depth if needed. Row numbers in error messages are
    file line numbers (the header is line 1).
    """
    rows = _read_two_column_csv(path, SSP_HEADER)
    rows.sort(key=lambda r: r[1])
    for (line_a, za, _), (line_b, zb, _) in zip(rows, rows[1:]):
        if za == zb:
            raise DuplicateDepth(max(line_a, line_b), zb)
    return SoundSpeedProfile([r[1] for r in rows], [r[2] for r in rows])


def save_ssp_csv(ssp: SoundSpeedProfile, path) -> None:
    _write_two_column_csv(path, SSP_HEADER, ssp.depths, ssp.speeds)


def _read_two_column_csv(path, header: tuple[str, str]) -> list[tuple[int, float, float]]:
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            head = next(reader)
        except StopIteration:
            raise CSVParseError("empty file", row=1) from None
        if tuple(h.strip() for h in head) != header:
            raise CSVParseError(f"expected header {','.join(header)}, got {','.join(head)}", row=1)
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 2:
                raise CSVParseError(f"expected 2 fields, got {len(rec)}", row=line)
            try:
                a, b = float(rec[0]), float(rec[1])
            except ValueError:
                raise CSVParseError(f"non-numeric value in {rec!r}", row=line) from None
            if not (np.isfinite(a) and np.isfinite(b)):
                raise CSVParseError(f"non-finite value in {rec!r}", row=line)
            rows.append((line, a, b))
    if not rows:
        raise CSVParseError("no data rows", row=2)
    return rows


def _write_two_column_csv(path, header, a, b) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(a, b):
            w.writerow([repr(float(x)), repr(float(y))])


class BottomModel(str, enum.Enum):
    RIGID = "rigid"
    HALFSPACE = "halfspace"


@dataclass(frozen=True, eq=False)
class Waveguide:
    """
    Range-independent waveguide: water column over a rigid or fluid bottom.

    ``bottom_attenuation`` is in dB per wavelength and only enters through
    modal attenuation for the HALFSPACE model.
    """

    ssp: SoundSpeedProfile
    water_depth: float
    water_density: float = 1000.0
    bottom_speed: float = 1600.0
    bottom_density: float = 1500.0
    bottom_attenuation: float = 0.0
    bottom_model: BottomModel = BottomModel.HALFSPACE
    _hash: str = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bottom_model", BottomModel(self.bottom_model))
        if self.water_depth <= 0:
            raise InvariantError("water_depth must be positive")
        if self.water_density <= 0 or self.bottom_density <= 0:
            raise InvariantError("densities must be positive")
        if self.bottom_attenuation < 0:
            raise InvariantError("bottom_attenuation must be >= 0")
        if self.bottom_model is BottomModel.HALFSPACE:
            cmax = float(self.ssp.speed_at(self.water_column_samples()).max())
            if self.bottom_speed <= cmax:
                raise InvariantError(
                    f"bottom_speed {self.bottom_speed:g} must exceed max water speed {cmax:g}"
                )
        object.__setattr__(self, "_hash", self._compute_hash())

    def water_column_samples(self) -> np.ndarray:
        z = self.ssp.depths[self.ssp.depths < self.water_depth]
        return np.r_[z, self.water_depth]

    @property
    def min_water_speed(self) -> float:
        return float(self.ssp.speed_at(self.water_column_samples()).min())

    @property
    def max_water_speed(self) -> float:
        return float(self.ssp.speed_at(self.water_column_samples()).max())

    def speed_at(self, z) -> np.ndarray:
        """Sound speed including the sediment below ``water_depth``."""
        z = np.asarray(z, dtype=float)
        c = self.ssp.speed_at(np.minimum(z, self.water_depth))
        if self.bottom_model is BottomModel.HALFSPACE:
            c = np.where(z > self.water_depth, self.bottom_speed, c)
        return c

    def density_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.bottom_model is BottomModel.HALFSPACE:
            return np.where(z > self.water_depth, self.bottom_density, self.water_density)
        return np.full(z.shape, self.water_density)

    def to_dict(self) -> dict:
        return {
            "ssp": {"depth_m": self.ssp.depths.tolist(), "speed_mps": self.ssp.speeds.tolist()},
            "water_depth": self.water_depth,
            "water_density": self.water_density,
            "bottom_speed": self.bottom_speed,
            "bottom_density": self.bottom_density,
            "bottom_attenuation": self.bottom_attenuation,
            "bottom_model": self.bottom_model.value,
        }

    def _compute_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def env_hash(self) -> str:
        """SHA-256 of the canonical JSON form; stable across runs."""
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, Waveguide):
            return NotImplemented
        return self._hash == other._hash

    def __hash__(self):
        return hash(self._hash)


@dataclass(frozen=True, eq=False)
class BathymetryTransect:
    """Water depth along a straight source-receiver path, linear between points."""

    ranges: np.ndarray
    depths: np.ndarray

    def __post_init__(self):
        r = _frozen(self.ranges)
        d = _frozen(self.depths)
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "depths", d)
        if r.ndim != 1 or r.shape != d.shape or r.size < 1:
            raise InvariantError("ranges and depths must be non-empty 1-D arrays of equal length")
        if r[0] != 0.0:
            raise InvariantError("first range must be 0")
        if np.any(np.diff(r) <= 0):
            raise InvariantError("ranges must be strictly increasing")
        if np.any(d <= 0):
            raise InvariantError("depths must be positive")

    @classmethod
    def flat(cls, depth: float, length: float) -> "BathymetryTransect":
        return cls([0.0, length], [depth, depth])

    def depth_at(self, r) -> np.ndarray:
        return np.interp(r, self.ranges, self.depths)


def min_depth_over(transect: BathymetryTransect, r0: float, r1: float) -> float:
    """Minimum linearly interpolated depth on the range interval ``[r0, r1]``."""
    last = transect.ranges[-1]
    if not (0 <= r0 < r1 <= last):
        raise RangeOutsideTransect(f"interval [{r0:g}, {r1:g}] not within [0, {last:g}]")
    inside = (transect.ranges > r0) & (transect.ranges < r1)
    candidates = np.r_[transect.depth_at([r0, r1]), transect.depths[inside]]
    return float(candidates.min())


def load_transect_csv(path) -> BathymetryTransect:
    rows = _read_two_column_csv(path, TRANSECT_HEADER)
    return BathymetryTransect([r[1] for r in rows], [r[2] for r in rows])


def save_transect_csv(transect: BathymetryTransect, path) -> None:
    _write_two_column_csv(path, TRANSECT_HEADER, transect.ranges, transect.depths)
