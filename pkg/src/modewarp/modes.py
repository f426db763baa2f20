"""
Normal-mode solver for range-independent waveguides.

The depth equation

    rho d/dz (1/rho dPsi/dz) + (omega^2/c(z)^2 - k^2) Psi = 0,   Psi(0) = 0

is discretised with the standard three-point stencil on a uniform grid,
written in half-cell (finite-volume) form so that density jumps at the
water/sediment interface are handled exactly. This yields a generalised
symmetric tridiagonal problem A psi = k^2 M psi, which is scaled to a
standard one and handed to LAPACK's bisection/inverse-iteration solver.

A HALFSPACE bottom is modelled by extending the grid through a sediment
layer two water depths thick, terminated pressure-release; only modes
with phase speed below the sediment speed (trapped modes) are kept.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import linear_sum_assignment

from .env import BottomModel, Waveguide
from .errors import GridTooCoarse

# attenuation conversion: dB/wavelength -> loss tangent of the wavenumber
_DB_PER_WAVELENGTH = 40.0 * np.pi * np.log10(np.e)

TABLE_HEADER = ("freq_hz", "mode", "k_radpm", "vg_mps")


def default_dz(wg: Waveguide, frequency: float) -> float:
    """min(1 m, shortest wavelength / 20)."""
    return min(1.0, wg.min_water_speed / frequency / 20.0)


@dataclass(frozen=True, eq=False)
class Mode:
    index: int
    wavenumber: float
    psi: np.ndarray
    attenuation: float = 0.0
    group_velocity: float = float("nan")
    turning_depth: float = float("nan")

    def phase_speed(self, frequency: float) -> float:
        return 2 * np.pi * frequency / self.wavenumber


@dataclass(frozen=True, eq=False)
class ModeSet:
    """
    Modes of one waveguide at one frequency, ordered by descending wavenumber.

    ``z`` is the full computational grid (including the sediment basement
    for a HALFSPACE bottom), ``weights`` the matching quadrature weights of
    the 1/rho inner product, so that ``sum(weights * psi_m * psi_n)`` is the
    trapezoid-rule value of the integral of psi_m psi_n / rho.
    """

    frequency: float
    z: np.ndarray
    weights: np.ndarray
    water_depth: float
    modes: tuple[Mode, ...]
    below_cutoff: bool = False
    env_hash: str = ""
    _meta: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.array([m.wavenumber for m in self.modes])

    @property
    def group_velocities(self) -> np.ndarray:
        return np.array([m.group_velocity for m in self.modes])

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.weights * a * b))

    def psi_at(self, depth) -> np.ndarray:
        """Eigenfunction values at ``depth`` by linear interpolation, shape (n_modes, ...)."""
        depth = np.asarray(depth, dtype=float)
        if not self.modes:
            return np.zeros((0,) + depth.shape)
        return np.stack([np.interp(depth, self.z, m.psi) for m in self.modes])

    def with_modes(self, modes) -> "ModeSet":
        modes = tuple(modes)
        return replace(self, modes=modes, below_cutoff=self.below_cutoff and not modes)

    def to_dict(self, include_psi: bool = True) -> dict:
        """Structured export; schema documented in the README."""
        out = {
            "frequency_hz": self.frequency,
            "dz_m": self.dz,
            "water_depth_m": self.water_depth,
            "n_grid": int(self.z.size),
            "below_cutoff": self.below_cutoff,
            "env_hash": self.env_hash,
            "modes": [],
        }
        for m in self.modes:
            rec = {
                "index": m.index,
                "k_radpm": m.wavenumber,
                "alpha_npm": m.attenuation,
                "vg_mps": None if np.isnan(m.group_velocity) else m.group_velocity,
                "turning_depth_m": m.turning_depth,
            }
            if include_psi:
                rec["psi"] = m.psi.tolist()
            out["modes"].append(rec)
        if include_psi:
            out["z_m"] = self.z.tolist()
        return out

    def save_json(self, path, include_psi: bool = True) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_psi), indent=1, sort_keys=True) + "\n")

    def save_eigenfunction_csv(self, path, max_depth: float | None = None) -> None:
        """Columns ``z_m,psi_mode1,...``; water column only unless ``max_depth`` is given."""
        zmax = self.water_depth if max_depth is None else max_depth
        keep = self.z <= zmax + 1e-9
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["z_m"] + [f"psi_mode{m.index}" for m in self.modes])
            cols = [m.psi[keep] for m in self.modes]
            for i, z in enumerate(self.z[keep]):
                w.writerow([f"{z:.6g}"] + [f"{c[i]:.9e}" for c in cols])


# -- discretisation ---------------------------------------------------------


@dataclass(frozen=True)
class _Grid:
    z: np.ndarray  # unknown nodes (excludes z=0 and a pressure-release end)
    full_z: np.ndarray  # including boundary nodes where psi = 0
    h: float
    mass: np.ndarray  # M_i = int over the node's cell of 1/rho
    slowness2: np.ndarray  # int over cell of 1/(rho c^2)
    coupling: np.ndarray  # 1/(rho_{i+1/2} h)
    sediment_slowness2: np.ndarray  # sediment part of slowness2 (for attenuation)
    water_depth: float


def _build_grid(wg: Waveguide, dz: float) -> _Grid:
    D = wg.water_depth
    n_water = int(np.ceil(D / dz - 1e-9))
    h = D / n_water
    halfspace = wg.bottom_model is BottomModel.HALFSPACE
    n_total = 3 * n_water if halfspace else n_water
    full_z = np.arange(n_total + 1) * h
    # unknowns: drop the surface node, and the pressure-release basement end
    z = full_z[1:-1] if halfspace else full_z[1:]

    c_water = wg.ssp.speed_at(np.minimum(z, D))
    rho_w, rho_b, c_b = wg.water_density, wg.bottom_density, wg.bottom_speed
    # properties of the half-cells above (L) and below (R) each node
    in_water_L = z <= D + 1e-9 * h
    in_water_R = z < D - 1e-9 * h
    if not halfspace:
        in_water_L[:] = True
        in_water_R[:] = True
    rho_L = np.where(in_water_L, rho_w, rho_b)
    rho_R = np.where(in_water_R, rho_w, rho_b)
    c_L = np.where(in_water_L, c_water, c_b)
    c_R = np.where(in_water_R, c_water, c_b)
    wL = np.full(z.shape, 0.5 * h)
    wR = np.full(z.shape, 0.5 * h)
    if not halfspace:
        wR[-1] = 0.0  # rigid bottom: Neumann node owns half a cell
    mass = wL / rho_L + wR / rho_R
    slow_L = wL / (rho_L * c_L**2)
    slow_R = wR / (rho_R * c_R**2)
    slowness2 = slow_L + slow_R
    sed = np.where(in_water_L, 0.0, slow_L) + np.where(in_water_R, 0.0, slow_R)
    if not halfspace:
        sed = np.zeros_like(z)
    mid = z[:-1] + 0.5 * h
    rho_mid = np.where((mid < D) | (not halfspace), rho_w, rho_b)
    coupling = 1.0 / (rho_mid * h)
    return _Grid(z, full_z, h, mass, slowness2, coupling, sed, D)


def _check_grid(wg: Waveguide, frequency: float, dz: float) -> None:
    lam = wg.min_water_speed / frequency
    if dz > lam / 10.0 * (1 + 1e-12):
        raise GridTooCoarse(
            f"dz={dz:g} m exceeds wavelength/10={lam / 10:g} m at {frequency:g} Hz"
        )


def _sign_fix(psi: np.ndarray) -> np.ndarray:
    big = np.abs(psi) > 1e-10 * np.abs(psi).max()
    i = int(np.argmax(big))
    return -psi if psi[i] < 0 else psi


def _turning_depth(z: np.ndarray, c: np.ndarray, omega: float, k: float, water_depth: float) -> float:
    ok = (omega / c) ** 2 - k**2 > 0
    ok &= z <= water_depth + 1e-9
    if not np.any(ok):
        return 0.0
    return float(z[np.flatnonzero(ok)[-1]])


def solve_modes(
    wg: Waveguide, frequency: float, max_modes: int = 10, dz: float | None = None
) -> ModeSet:
    """
    Trapped normal modes at one frequency.

    Parameters
    ----------
    wg : Waveguide
    frequency : float
        Hz, > 0.
    max_modes : int
        Upper bound on the number of modes returned (largest wavenumbers).
    dz : float, optional
        Requested grid step; the actual step is shrunk so that the water
        depth is a whole number of cells. Defaults to ``default_dz``.

    Returns
    -------
    ModeSet
        Modes with wavenumber, normalised eigenfunction, attenuation and
        turning depth. Group velocities are left as NaN; see
        ``group_velocity_perturbation``. If no mode is trapped the set is
        empty and ``below_cutoff`` is True.
    """
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    if max_modes < 1:
        raise ValueError("max_modes must be >= 1")
    if dz is None:
        dz = default_dz(wg, frequency)
    _check_grid(wg, frequency, dz)
    g = _build_grid(wg, dz)
    return _solve_on_grid(wg, g, frequency, max_modes)


def _solve_on_grid(wg: Waveguide, g: _Grid, frequency: float, max_modes: int) -> ModeSet:
    omega = 2 * np.pi * frequency
    halfspace = wg.bottom_model is BottomModel.HALFSPACE
    n = g.z.size
    stiff = np.zeros(n)
    stiff[:-1] += g.coupling
    stiff[1:] += g.coupling
    stiff[0] += 1.0 / (wg.water_density * g.h)  # link to psi(0) = 0
    if halfspace:
        stiff[-1] += 1.0 / (wg.bottom_density * g.h)  # link to psi(3D) = 0
    a_diag = omega**2 * g.slowness2 - stiff
    inv_sqrt_m = 1.0 / np.sqrt(g.mass)
    d = a_diag * inv_sqrt_m**2
    e = g.coupling * inv_sqrt_m[:-1] * inv_sqrt_m[1:]

    k2_floor = (omega / wg.bottom_speed) ** 2 if halfspace else 0.0
    count = min(max_modes, n)
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(n - count, n - 1))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > k2_floor
    vals, vecs = vals[keep], vecs[:, keep]

    full_z = g.full_z
    weights = np.zeros(full_z.size)
    weights[1 : 1 + n] = g.mass
    c_full = wg.speed_at(full_z)
    delta = wg.bottom_attenuation / _DB_PER_WAVELENGTH
    modes = []
    for j in range(vals.size):
        psi_core = vecs[:, j] * inv_sqrt_m  # satisfies psi^T M psi = 1
        psi = np.zeros(full_z.size)
        psi[1 : 1 + n] = psi_core
        psi = _sign_fix(psi)
        k = float(np.sqrt(vals[j]))
        alpha = 0.0
        if halfspace and delta > 0:
            alpha = float(delta / k * omega**2 * np.sum(g.sediment_slowness2 * psi[1 : 1 + n] ** 2))
        tz = _turning_depth(full_z, c_full, omega, k, g.water_depth)
        modes.append(Mode(0, k, psi, alpha, float("nan"), tz))
    # ties in k (degenerate ducts) are broken by ascending turning depth
    modes.sort(key=lambda m: (-m.wavenumber, m.turning_depth))
    modes = tuple(replace(m, index=i + 1) for i, m in enumerate(modes))
    for m in modes:
        m.psi.setflags(write=False)
    meta = {"slowness2": np.r_[0.0, g.slowness2, np.zeros(full_z.size - 1 - n)]}
    return ModeSet(
        frequency=float(frequency),
        z=full_z,
        weights=weights,
        water_depth=g.water_depth,
        modes=modes,
        below_cutoff=not modes,
        env_hash=wg.env_hash,
        _meta=meta,
    )


def group_velocity_perturbation(ms: ModeSet, wg: Waveguide) -> ModeSet:
    """
    Fill group velocities from the first-order perturbation formula

        v_g = k / (omega * integral(psi^2 / (rho c^2) dz))

    evaluated with the same quadrature as the eigenproblem, so the value is
    the exact derivative d(omega)/dk of the discrete dispersion relation.
    """
    if ms.env_hash and ms.env_hash != wg.env_hash:
        raise ValueError("mode set was not solved for this waveguide")
    s2 = ms._meta.get("slowness2")
    if s2 is None:
        s2 = ms.weights / wg.speed_at(ms.z) ** 2
    out = []
    for m in ms.modes:
        vg = m.wavenumber / (ms.omega * float(np.sum(s2 * m.psi**2)))
        out.append(replace(m, group_velocity=vg))
    return ms.with_modes(out)


def cutoff_filter(ms: ModeSet, min_depth_on_path: float, wg: Waveguide | None = None) -> ModeSet:
    """
    Drop modes whose lower turning depth reaches ``min_depth_on_path``.

    A crude stand-in for seamount blocking: a mode survives the shallowest
    point of the path only if its refracted energy turns above it.
    """
    if min_depth_on_path <= 0:
        raise ValueError("min_depth_on_path must be positive")
    if min_depth_on_path >= ms.water_depth:
        return ms
    return ms.with_modes(m for m in ms.modes if m.turning_depth < min_depth_on_path)


def sign_changes(psi: np.ndarray, rel_tol: float = 1e-8) -> int:
    """Number of sign changes ignoring samples below ``rel_tol`` of the peak."""
    psi = np.asarray(psi)
    sig = psi[np.abs(psi) > rel_tol * np.abs(psi).max()]
    return int(np.count_nonzero(np.diff(np.sign(sig)) != 0))


def energy_depth(ms: ModeSet, mode: Mode, fraction: float = 0.9) -> float:
    """Depth above which ``fraction`` of the integral of psi^2 / rho lies."""
    cum = np.cumsum(ms.weights * mode.psi**2)
    return float(ms.z[np.searchsorted(cum, fraction * cum[-1])])


# -- dispersion tables --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """
    Wavenumbers and group velocities of tracked modes on a frequency grid.

    Arrays are indexed ``[mode_row, frequency]``; ``labels[row]`` is the
    1-based mode number. Cells where a mode is not trapped (or is beyond
    ``max_modes``) hold NaN. ``psi`` maps each probe depth to eigenfunction
    values at that depth, ``turning`` holds lower turning depths.
    """

    frequencies: np.ndarray
    labels: np.ndarray
    k: np.ndarray
    vg: np.ndarray
    alpha: np.ndarray
    turning: np.ndarray
    psi: dict = field(default_factory=dict)
    dz: float = float("nan")
    env_hash: str = ""

    @property
    def n_modes(self) -> int:
        return int(self.labels.size)

    def row(self, mode: int) -> int:
        hits = np.flatnonzero(self.labels == mode)
        if hits.size == 0:
            raise KeyError(f"mode {mode} not in table")
        return int(hits[0])

    def vg_curve(self, mode: int) -> tuple[np.ndarray, np.ndarray]:
        """(frequencies, group velocities) where the mode is present."""
        v = self.vg[self.row(mode)]
        ok = ~np.isnan(v)
        return self.frequencies[ok], v[ok]

    def k_curve(self, mode: int) -> tuple[np.ndarray, np.ndarray]:
        k = self.k[self.row(mode)]
        ok = ~np.isnan(k)
        return self.frequencies[ok], k[ok]

    def vg_at(self, mode: int, frequency: float) -> float:
        f, v = self.vg_curve(mode)
        if f.size == 0 or not (f[0] - 1e-9 <= frequency <= f[-1] + 1e-9):
            return float("nan")
        return float(np.interp(frequency, f, v))

    def band(self, f_lo: float, f_hi: float) -> "DispersionTable":
        keep = (self.frequencies >= f_lo - 1e-9) & (self.frequencies <= f_hi + 1e-9)
        return replace(
            self,
            frequencies=self.frequencies[keep],
            k=self.k[:, keep],
            vg=self.vg[:, keep],
            alpha=self.alpha[:, keep],
            turning=self.turning[:, keep],
            psi={z: p[:, keep] for z, p in self.psi.items()},
        )

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_HEADER)
            for j, f in enumerate(self.frequencies):
                for i, lab in enumerate(self.labels):
                    if np.isnan(self.k[i, j]):
                        continue
                    w.writerow([f"{f:.6f}", int(lab), f"{self.k[i, j]:.12e}", f"{self.vg[i, j]:.9f}"])


def load_table_csv(path) -> DispersionTable:
    """Read a table written by ``DispersionTable.save_csv`` (k and v_g only)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        head = tuple(next(reader))
        if head != TABLE_HEADER:
            raise ValueError(f"unexpected header {head}")
        recs = [(float(a), int(b), float(c), float(d)) for a, b, c, d in reader]
    freqs = np.unique([r[0] for r in recs])
    labels = np.unique([r[1] for r in recs])
    k = np.full((labels.size, freqs.size), np.nan)
    vg = np.full_like(k, np.nan)
    for f, m, kk, v in recs:
        i, j = np.searchsorted(labels, m), np.searchsorted(freqs, f)
        k[i, j], vg[i, j] = kk, v
    nan = np.full_like(k, np.nan)
    return DispersionTable(freqs, labels, k, vg, nan, nan.copy())


def _frequency_grid(f_min: float, f_max: float, df: float) -> np.ndarray:
    n = int(np.floor((f_max - f_min) / df + 1e-9))
    return f_min + df * np.arange(n + 1)


def dispersion_table(
    wg: Waveguide,
    f_min: float,
    f_max: float,
    df: float,
    max_modes: int = 10,
    dz: float | None = None,
    probe_depths=(),
    frequencies=None,
) -> DispersionTable:
    """
    Solve modes and group velocities on a frequency grid and track mode identity.

    A single depth grid (``dz`` defaulting to the ``f_max`` value) is used
    for every frequency so eigenfunctions can be compared directly. Labels
    follow the eigenfunction with the highest correlation at the previous
    frequency rather than the wavenumber index; modes that appear later
    receive the next free label.
    """
    if not 0 < f_min < f_max and frequencies is None:
        raise ValueError("require 0 < f_min < f_max")
    if df <= 0 and frequencies is None:
        raise ValueError("df must be positive")
    freqs = _frequency_grid(f_min, f_max, df) if frequencies is None else np.asarray(frequencies, float)
    if dz is None:
        dz = default_dz(wg, float(freqs.max()))
    _check_grid(wg, float(freqs.max()), dz)
    g = _build_grid(wg, dz)
    probe_depths = tuple(float(p) for p in probe_depths)

    solved = []
    for f in freqs:
        ms = group_velocity_perturbation(_solve_on_grid(wg, g, float(f), max_modes), wg)
        solved.append(_compact(ms, probe_depths))
    return _track(freqs, solved, probe_depths, dz=g.h, env_hash=wg.env_hash)


def _compact(ms: ModeSet, probe_depths) -> dict:
    """Reduce a ModeSet to what tracking and the table need."""
    water = ms.z <= ms.water_depth + 1e-9
    stride = max(1, int(water.sum() // 800))
    w = ms.weights[water][::stride]
    shapes = np.array([m.psi[water][::stride] for m in ms.modes]).reshape(len(ms), -1)
    return {
        "k": ms.wavenumbers,
        "vg": ms.group_velocities,
        "alpha": np.array([m.attenuation for m in ms.modes]),
        "turning": np.array([m.turning_depth for m in ms.modes]),
        "psi": {z: ms.psi_at(z) for z in probe_depths},
        "shape": shapes * np.sqrt(w),
    }


def _track(freqs, solved, probe_depths, dz, env_hash) -> DispersionTable:
    # sequential post-pass: identical output whatever order the solves ran in
    rows: list[dict] = []  # label -> {col: index into solved[col]}
    prev_rows = []  # (row id, shape) at previous frequency
    for j, s in enumerate(solved):
        n = s["k"].size
        assigned = [-1] * n
        if prev_rows and n:
            prev_shapes = np.array([p[1] for p in prev_rows])
            corr = np.abs(prev_shapes @ s["shape"].T)
            norms = np.outer(np.linalg.norm(prev_shapes, axis=1), np.linalg.norm(s["shape"], axis=1))
            corr = corr / np.where(norms > 0, norms, 1.0)
            pi, ci = linear_sum_assignment(-corr)
            for a, b in zip(pi, ci):
                if corr[a, b] > 0.3:
                    assigned[b] = prev_rows[a][0]
        for b in range(n):
            if assigned[b] < 0:
                rows.append({})
                assigned[b] = len(rows) - 1
        for b in range(n):
            rows[assigned[b]][j] = b
        prev_rows = [(assigned[b], s["shape"][b]) for b in range(n)]

    M, F = len(rows), len(solved)
    out = {name: np.full((M, F), np.nan) for name in ("k", "vg", "alpha", "turning")}
    psi = {z: np.full((M, F), np.nan) for z in probe_depths}
    for i, r in enumerate(rows):
        for j, b in r.items():
            for name in out:
                out[name][i, j] = solved[j][name][b]
            for z in probe_depths:
                psi[z][i, j] = solved[j]["psi"][z][b]
    return DispersionTable(
        frequencies=np.asarray(freqs, dtype=float),
        labels=np.arange(1, M + 1),
        k=out["k"],
        vg=out["vg"],
        alpha=out["alpha"],
        turning=out["turning"],
        psi=psi,
        dz=dz,
        env_hash=env_hash,
    )
