"""
Frozen reference environments and analysis settings.

The dual-channel parameters were tuned once so the mode-3/mode-1 group
speed ordering flips between 20 Hz and 70 Hz, and then frozen.
"""

from __future__ import annotations

import math
from importlib import resources

from .env import (
    BathymetryTransect,
    BottomModel,
    DualChannelParams,
    SoundSpeedProfile,
    Waveguide,
    build_dual_channel_ssp,
    load_ssp_csv,
    load_transect_csv,
)

WATER_DEPTH = 2000.0
BOTTOM_SPEED = 1600.0
BOTTOM_DENSITY = 1500.0
BOTTOM_ATTENUATION = 0.5
SOURCE_DEPTH = 10.0
RECEIVER_DEPTH = 52.0

DUAL_CHANNEL = DualChannelParams(
    surface_speed=1435.0,
    surface_gradient=0.008,
    duct1_depth=60.0,
    duct2_depth=250.0,
    duct1_strength=10.0,
    duct2_strength=10.0,
    duct_width1=40.0,
    duct_width2=120.0,
)

# Upper duct removed: one sound-speed minimum.
SINGLE_DUCT = DualChannelParams(
    surface_speed=DUAL_CHANNEL.surface_speed,
    surface_gradient=DUAL_CHANNEL.surface_gradient,
    duct1_depth=DUAL_CHANNEL.duct1_depth,
    duct2_depth=DUAL_CHANNEL.duct2_depth,
    duct1_strength=0.0,
    duct2_strength=DUAL_CHANNEL.duct2_strength,
    duct_width1=DUAL_CHANNEL.duct_width1,
    duct_width2=DUAL_CHANNEL.duct_width2,
)

DURATION_POLICY = {"start": "first", "end": "last", "min_prominence": 0.02, "min_separation": 0.05}
DURATION_SPEEDS = {"mode_exclusions": [1], "band": None, "aggregate": "extreme", "refracted_only": True}
MODE_PAIR = {
    "band": [30.0, 80.0],
    "min_speed_difference": 1.0,
    "start": "penultimate",
    "end": "last",
    "min_prominence": 0.1,
    "min_separation": 0.05,
}
WARP = {"t_r": None, "guard": 0.05, "output_fs": None, "shrink": 0.1, "t_r_fraction": 0.1}


def data_path(name: str):
    return resources.files("modewarp").joinpath("data", name)


def dual_channel_ssp(params: DualChannelParams = DUAL_CHANNEL, depth: float = WATER_DEPTH, dz: float = 1.0):
    return build_dual_channel_ssp(params, depth, dz)


def waveguide(ssp: SoundSpeedProfile, depth: float = WATER_DEPTH) -> Waveguide:
    return Waveguide(
        ssp,
        depth,
        bottom_speed=BOTTOM_SPEED,
        bottom_density=BOTTOM_DENSITY,
        bottom_attenuation=BOTTOM_ATTENUATION,
        bottom_model=BottomModel.HALFSPACE,
    )


def dual_channel_waveguide(params: DualChannelParams = DUAL_CHANNEL, dz: float = 1.0) -> Waveguide:
    return waveguide(dual_channel_ssp(params, WATER_DEPTH, dz))


def single_duct_waveguide() -> Waveguide:
    return dual_channel_waveguide(SINGLE_DUCT)


def perturbed_waveguide(scale: float = 1.2) -> Waveguide:
    """Dual-channel fixture with both duct depths scaled by ``scale``."""
    p = DUAL_CHANNEL
    q = DualChannelParams(
        p.surface_speed, p.surface_gradient, p.duct1_depth * scale, p.duct2_depth * scale,
        p.duct1_strength, p.duct2_strength, p.duct_width1, p.duct_width2,
    )
    return dual_channel_waveguide(q)


def isovelocity_waveguide(c: float = 1500.0, depth: float = WATER_DEPTH) -> Waveguide:
    ssp = SoundSpeedProfile([0.0, depth], [c, c])
    return Waveguide(ssp, depth, bottom_model=BottomModel.RIGID)


def ssp(name: str, depth: float = WATER_DEPTH, dz: float = 1.0) -> SoundSpeedProfile:
    if name == "dual_channel":
        return dual_channel_ssp(DUAL_CHANNEL, depth, dz)
    if name == "single_duct":
        return dual_channel_ssp(SINGLE_DUCT, depth, dz)
    if name == "dual_channel_7pt":
        with resources.as_file(data_path("dual_channel_7pt.csv")) as p:
            return load_ssp_csv(p)
    raise ValueError(f"unknown SSP fixture {name!r}")


def seamount_transect() -> BathymetryTransect:
    """V-shaped transect: 2000 m at both ends, 800 m vertex at 300 km."""
    with resources.as_file(data_path("seamount_v.csv")) as p:
        return load_transect_csv(p)


def default_duration(range_m: float) -> float:
    """Window length (s) that comfortably holds every arrival up to ~600 km."""
    return float(max(10, math.ceil(range_m / 1e4)))
