"""Normal-mode dispersion modelling, warping mode separation and single-receiver ranging."""

from .env import (
    BathymetryTransect,
    BottomModel,
    DualChannelParams,
    SoundSpeedProfile,
    Waveguide,
    build_dual_channel_ssp,
    load_ssp_csv,
    load_transect_csv,
    min_depth_over,
)
from .errors import ModewarpError
from .modes import DispersionTable, ModeSet, cutoff_filter, dispersion_table, solve_modes
from .ranging import (
    PeakPolicy,
    RangeEstimate,
    dispersion_duration,
    equivalent_speeds_duration,
    estimate_range_duration,
    estimate_range_mode_pair,
    mode_pair_delay,
)
from .synth import Scenario, SourceWavelet, TimeSeries, synthesize
from .tfr import envelope, extract_ridge, find_peaks, stft
from .warp import ModeBand, WarpConfig, separate_modes, unwarp, warp

__version__ = "0.1.0"

__all__ = [
    "BathymetryTransect",
    "BottomModel",
    "DispersionTable",
    "DualChannelParams",
    "ModeBand",
    "ModeSet",
    "ModewarpError",
    "PeakPolicy",
    "RangeEstimate",
    "Scenario",
    "SoundSpeedProfile",
    "SourceWavelet",
    "TimeSeries",
    "WarpConfig",
    "Waveguide",
    "build_dual_channel_ssp",
    "cutoff_filter",
    "dispersion_duration",
    "dispersion_table",
    "envelope",
    "equivalent_speeds_duration",
    "estimate_range_duration",
    "estimate_range_mode_pair",
    "extract_ridge",
    "find_peaks",
    "load_ssp_csv",
    "load_transect_csv",
    "min_depth_over",
    "mode_pair_delay",
    "separate_modes",
    "solve_modes",
    "stft",
    "synthesize",
    "unwarp",
    "warp",
]
