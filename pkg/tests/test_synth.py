import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modewarp import fixtures
from modewarp.env import BottomModel, SoundSpeedProfile, Waveguide
from modewarp.errors import SynthesisError
from modewarp.modes import solve_modes
from modewarp.synth import (
    Scenario,
    SourceWavelet,
    TimeSeries,
    WaveletKind,
    load_timeseries_csv,
    load_wav,
    synthesize,
    transfer_function,
)
from modewarp.tfr import envelope, find_peaks


@pytest.fixture(scope="module")
def one_mode():
    wg = Waveguide(SoundSpeedProfile([0.0, 50.0], [1500.0, 1500.0]), 50.0, bottom_model=BottomModel.RIGID)
    sc = Scenario(20.0, 30.0, 5000.0, 250.0, 4.0)
    return wg, sc


def test_single_mode_transfer_function_exact(one_mode):
    wg, sc = one_mode
    ms = solve_modes(wg, 12.0, 5, dz=0.1)
    assert len(ms) == 1
    m = ms[0]
    p = transfer_function(wg, sc, 12.0, ms)
    ps, pr = np.interp(sc.source_depth, ms.z, m.psi), np.interp(sc.receiver_depth, ms.z, m.psi)
    expect = abs(ps * pr) / (wg.water_density * np.sqrt(8 * np.pi * sc.range * m.wavenumber))
    assert abs(p) == pytest.approx(expect, rel=1e-12)


def test_transfer_function_rejects_wrong_frequency(one_mode):
    wg, sc = one_mode
    with pytest.raises(ValueError):
        transfer_function(wg, sc, 13.0, solve_modes(wg, 12.0, 2, dz=0.1))


def test_wavelets():
    r = SourceWavelet()
    assert r.spectrum(40.0) == pytest.approx(1.0)
    assert r.spectrum(0.0) == 0.0
    flat = SourceWavelet.flat()
    np.testing.assert_allclose(flat.spectrum([1.0, 50.0, 100.0]), 1.0, rtol=1e-6)
    with pytest.raises(ValueError):
        SourceWavelet(WaveletKind.GAUSSIAN_PULSE, 40.0)


def test_linearity_and_parseval(synth_at, dual_wg):
    ts = synth_at(100.0)
    r = 100e3
    sc = Scenario(fixtures.SOURCE_DEPTH, fixtures.RECEIVER_DEPTH, r, 250.0, fixtures.default_duration(r))
    ts3 = synthesize(dual_wg, sc, SourceWavelet(amplitude=3.0), (10.0, 100.0), max_modes=10, dz=1.4)
    np.testing.assert_allclose(ts3.samples, 3.0 * ts.samples, rtol=1e-12, atol=1e-12 * np.abs(ts3.samples).max())
    X = np.fft.rfft(ts.samples)
    n = len(ts)
    w = np.full(X.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    spectral = float(np.sum(w * np.abs(X) ** 2)) / (n * ts.fs)
    assert spectral == pytest.approx(ts.energy(), rel=1e-10)


def test_mode_subsets_sum_to_full(synth_at):
    full = synth_at(100.0)
    parts = sum(synth_at(100.0, modes=(m,)).samples for m in range(1, 11))
    np.testing.assert_allclose(parts, full.samples, atol=1e-9 * np.abs(full.samples).max())


def test_arrival_ordering_low_frequency_first(synth_at):
    from modewarp.tfr import stft

    sp = stft(synth_at(200.0))
    def centroid(lo, hi):
        sel = (sp.frequencies >= lo) & (sp.frequencies <= hi)
        e = sp.magnitudes[sel].sum(axis=0) ** 2
        return float(np.sum(sp.times * e) / e.sum())
    assert centroid(10, 25) < centroid(60, 100)


def test_spread_scales_with_range(synth_at):
    pol = fixtures.DURATION_POLICY

    def spread(rk):
        pk = find_peaks(envelope(synth_at(rk)), pol["min_prominence"], pol["min_separation"])
        return pk[-1].time - pk[0].time

    ratio = spread(200.0) / spread(100.0)
    assert 1.7 <= ratio <= 2.3
    # order-of-magnitude: about a second and a half at 200 km
    assert 0.75 <= spread(200.0) <= 2.25


def test_errors(dual_wg):
    sc = Scenario(10.0, 52.0, 200e3, 250.0, 20.0)
    with pytest.raises(SynthesisError, match="Nyquist"):
        synthesize(dual_wg, sc, SourceWavelet(), (10.0, 130.0))
    short = Scenario(10.0, 52.0, 200e3, 250.0, 2.0)
    with pytest.raises(SynthesisError, match="exceeds"):
        synthesize(dual_wg, short, SourceWavelet(), (10.0, 100.0), dz=1.4)
    with pytest.raises(ValueError):
        synthesize(dual_wg, Scenario(10.0, 5000.0, 200e3, 250.0, 20.0), SourceWavelet())
    with pytest.raises(SynthesisError):
        synthesize(dual_wg, sc, SourceWavelet(), (10.0, 100.0), dz=1.4, modes=(42,))


def test_timeseries_io(tmp_path):
    rng = np.random.default_rng(0)
    ts = TimeSeries(250.0, 12.5, rng.standard_normal(500))
    ts.save_csv(tmp_path / "x.csv")
    back = load_timeseries_csv(tmp_path / "x.csv")
    assert back.fs == 250.0 and back.t0 == pytest.approx(12.5)
    np.testing.assert_allclose(back.samples, ts.samples, rtol=1e-11)
    ts.save_wav(tmp_path / "x.wav", {"note": "t"})
    w = load_wav(tmp_path / "x.wav")
    assert w.t0 == 12.5
    np.testing.assert_allclose(w.samples, ts.samples, rtol=1e-6)
    with pytest.raises(ValueError):
        TimeSeries(250.0, 0.0, np.array([1.0, np.nan]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 100.0), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_window_bounds(t0, a, b):
    ts = TimeSeries(100.0, t0, np.arange(400, dtype=float))
    lo, hi = sorted((t0 + a, t0 + a + b))
    w = ts.window(lo, hi)
    assert w.t0 >= lo - 1e-9 and w.times[-1] <= hi + 1e-9
