import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modewarp import fixtures
from modewarp.env import (
    BathymetryTransect,
    BottomModel,
    DualChannelParams,
    SoundSpeedProfile,
    Waveguide,
    build_dual_channel_ssp,
    load_ssp_csv,
    load_transect_csv,
    min_depth_over,
    save_ssp_csv,
)
from modewarp.errors import CSVParseError, DuplicateDepth, InvariantError, RangeOutsideTransect


def test_profile_invariants():
    with pytest.raises(InvariantError):
        SoundSpeedProfile([0.0], [1500.0])
    with pytest.raises(InvariantError):
        SoundSpeedProfile([1.0, 2.0], [1500.0, 1500.0])
    with pytest.raises(InvariantError):
        SoundSpeedProfile([0.0, 10.0, 10.0], [1500.0] * 3)
    with pytest.raises(InvariantError, match="outside"):
        SoundSpeedProfile([0.0, 10.0], [1500.0, 1800.0])


def test_profile_extrapolates_constant_below_last_sample():
    ssp = SoundSpeedProfile([0.0, 100.0], [1500.0, 1510.0])
    assert ssp.speed_at(50.0) == pytest.approx(1505.0)
    assert ssp.speed_at(5000.0) == pytest.approx(1510.0)


def test_dual_channel_closed_form():
    p = fixtures.DUAL_CHANNEL
    ssp = build_dual_channel_ssp(p, 2000.0, 1.0)
    z = ssp.depths[::97]
    expect = (
        p.surface_speed
        + p.surface_gradient * z
        - p.duct1_strength * np.exp(-(((z - p.duct1_depth) / p.duct_width1) ** 2))
        - p.duct2_strength * np.exp(-(((z - p.duct2_depth) / p.duct_width2) ** 2))
    )
    np.testing.assert_allclose(ssp.speed_at(z), expect, rtol=1e-12)
    assert len(ssp.local_minima()) == 2


@pytest.mark.parametrize(
    "kw",
    [dict(duct1_depth=300.0), dict(duct1_strength=-1.0), dict(duct_width2=0.0), dict(surface_gradient=0.0)],
)
def test_dual_channel_params_rejected(kw):
    base = dict(surface_speed=1435.0, surface_gradient=0.01, duct1_depth=60.0, duct2_depth=250.0,
                duct1_strength=5.0, duct2_strength=5.0, duct_width1=30.0, duct_width2=80.0)
    base.update(kw)
    with pytest.raises(InvariantError):
        DualChannelParams(**base)


params = st.builds(
    DualChannelParams,
    surface_speed=st.floats(1420, 1520),
    surface_gradient=st.floats(0.005, 0.05),
    duct1_depth=st.floats(20, 150),
    duct2_depth=st.floats(200, 600),
    duct1_strength=st.floats(0.5, 15),
    duct2_strength=st.floats(0.5, 15),
    duct_width1=st.floats(5, 40),
    duct_width2=st.floats(10, 80),
)


@settings(max_examples=40, deadline=None)
@given(params)
def test_no_ducts_is_monotone(p):
    q = DualChannelParams(p.surface_speed, p.surface_gradient, p.duct1_depth, p.duct2_depth,
                          0.0, 0.0, p.duct_width1, p.duct_width2)
    c = build_dual_channel_ssp(q, 1000.0, 2.0).speeds
    assert np.all(np.diff(c) > 0)


@settings(max_examples=40, deadline=None)
@given(params)
def test_minima_count_matches_strong_separated_ducts(p):
    sep = p.duct2_depth - p.duct1_depth
    # Steepest flank of s*exp(-(x/w)^2) is s*sqrt(2)*exp(-1/2)/w; it must beat the gradient.
    deep_enough = all(
        s * np.sqrt(2) * np.exp(-0.5) / w > p.surface_gradient * 1.2
        for s, w in ((p.duct1_strength, p.duct_width1), (p.duct2_strength, p.duct_width2))
    )
    if sep <= 2 * (p.duct_width1 + p.duct_width2) or not deep_enough or p.duct1_depth < 2 * p.duct_width1:
        return
    ssp = build_dual_channel_ssp(p, 1500.0, 0.5)
    assert len(ssp.local_minima()) == 2


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(1400, 1600), min_size=2, max_size=30))
def test_ssp_csv_round_trip(tmp_path_factory, speeds):
    z = np.cumsum(np.r_[0.0, np.full(len(speeds) - 1, 7.3)])
    ssp = SoundSpeedProfile(z, speeds)
    p = tmp_path_factory.mktemp("ssp") / "p.csv"
    save_ssp_csv(ssp, p)
    back = load_ssp_csv(p)
    np.testing.assert_allclose(back.depths, ssp.depths, rtol=1e-6)
    np.testing.assert_allclose(back.speeds, ssp.speeds, rtol=1e-6)


def test_csv_errors_name_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("depth_m,speed_mps\n0,1500\n10,abc\n")
    with pytest.raises(CSVParseError) as e:
        load_ssp_csv(p)
    assert e.value.row == 3
    p.write_text("depth_m,speed_mps\n0,1500\n10,1501\n10,1502\n")
    with pytest.raises(DuplicateDepth):
        load_ssp_csv(p)
    p.write_text("z,c\n0,1500\n")
    with pytest.raises(CSVParseError):
        load_ssp_csv(p)


def test_shipped_seven_point_profile_has_two_ducts():
    ssp = fixtures.ssp("dual_channel_7pt")
    assert len(ssp.local_minima()) == 2


def test_waveguide_requires_fast_halfspace():
    ssp = SoundSpeedProfile([0.0, 100.0], [1500.0, 1550.0])
    with pytest.raises(InvariantError):
        Waveguide(ssp, 100.0, bottom_speed=1520.0)
    Waveguide(ssp, 100.0, bottom_speed=1520.0, bottom_model=BottomModel.RIGID)


def test_env_hash_tracks_parameters():
    a = fixtures.dual_channel_waveguide()
    b = fixtures.dual_channel_waveguide()
    c = fixtures.perturbed_waveguide(1.2)
    assert a.env_hash == b.env_hash
    assert a.env_hash != c.env_hash


def test_seamount_transect():
    tr = fixtures.seamount_transect()
    assert min_depth_over(tr, 0.0, 200e3) == pytest.approx(1200.0)
    assert min_depth_over(tr, 0.0, 518e3) == pytest.approx(800.0)
    with pytest.raises(RangeOutsideTransect):
        min_depth_over(tr, 0.0, 700e3)


def test_transect_csv(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("range_m,depth_m\n0,100\n1000,50\n")
    tr = load_transect_csv(p)
    assert tr.depth_at(500.0) == pytest.approx(75.0)
    with pytest.raises(InvariantError):
        BathymetryTransect([0.0, 0.0], [1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(10, 5000), min_size=2, max_size=12),
    st.floats(0, 1),
    st.floats(0, 1),
)
def test_min_depth_over_bounds(depths, a, b):
    r = np.arange(len(depths)) * 1000.0
    tr = BathymetryTransect(r, depths)
    r0, r1 = sorted((a * r[-1], b * r[-1]))
    if r1 - r0 < 1e-6:
        return
    m = min_depth_over(tr, r0, r1)
    probe = tr.depth_at(np.linspace(r0, r1, 101))
    assert m <= probe.min() + 1e-9
    assert m >= min(depths) - 1e-9
