import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modewarp import fixtures
from modewarp.env import BottomModel, SoundSpeedProfile, Waveguide
from modewarp.errors import GridTooCoarse
from modewarp.modes import (
    cutoff_filter,
    dispersion_table,
    energy_depth,
    group_velocity_perturbation,
    load_table_csv,
    sign_changes,
    solve_modes,
)


@pytest.fixture(scope="module")
def dual_20(dual_wg):
    return group_velocity_perturbation(solve_modes(dual_wg, 20.0, 10, dz=1.0), dual_wg)


def test_isovelocity_closed_form_all_frequencies():
    wg = fixtures.isovelocity_waveguide(1500.0, 500.0)
    for f in (10.0, 30.0, 60.0):
        ms = solve_modes(wg, f, 5, dz=0.5)
        m = np.arange(1, len(ms) + 1)
        exact = np.sqrt((2 * np.pi * f / 1500.0) ** 2 - ((m - 0.5) * np.pi / 500.0) ** 2)
        np.testing.assert_allclose(ms.wavenumbers, exact, rtol=5e-4)


def test_rigid_isovelocity_group_below_phase_speed():
    wg = fixtures.isovelocity_waveguide(1500.0, 500.0)
    ms = group_velocity_perturbation(solve_modes(wg, 40.0, 6, dz=0.5), wg)
    for m in ms:
        assert 0 < m.group_velocity <= m.phase_speed(40.0)
        assert m.group_velocity * m.phase_speed(40.0) == pytest.approx(1500.0**2, rel=1e-3)


def test_structure_invariants(dual_20, dual_wg):
    ms = dual_20
    k = ms.wavenumbers
    assert np.all(np.diff(k) < 0) and np.all(k > 0)
    w = ms.omega
    for i, m in enumerate(ms):
        assert m.psi[0] == 0.0
        assert m.psi[1] > 0
        assert sign_changes(m.psi) == i
        assert ms.inner(m.psi, m.psi) == pytest.approx(1.0, abs=1e-6)
        assert dual_wg.min_water_speed <= w / m.wavenumber <= dual_wg.bottom_speed
    for i in range(len(ms)):
        for j in range(i):
            assert abs(ms.inner(ms[i].psi, ms[j].psi)) <= 1e-6


def test_group_velocity_sanity(dual_20, dual_wg):
    v = dual_20.group_velocities
    assert np.all(v >= 0.8 * dual_wg.min_water_speed)
    assert np.all(v <= max(dual_wg.bottom_speed, dual_wg.max_water_speed))


def test_grid_convergence(dual_wg):
    a = solve_modes(dual_wg, 100.0, 5, dz=0.7).wavenumbers
    b = solve_modes(dual_wg, 100.0, 5, dz=0.35).wavenumbers
    assert np.max(np.abs(a - b) / b) < 1e-4


def test_coarse_grid_refused(dual_wg):
    with pytest.raises(GridTooCoarse):
        solve_modes(dual_wg, 100.0, 3, dz=3.0)


def test_below_cutoff_is_empty_and_flagged():
    ssp = SoundSpeedProfile([0.0, 100.0], [1500.0, 1500.0])
    wg = Waveguide(ssp, 100.0, bottom_speed=1600.0)
    ms = solve_modes(wg, 2.0, 5)
    assert len(ms) == 0 and ms.below_cutoff


def test_energy_depths_of_fixture(dual_20):
    # Mode 1 stays in the upper ocean, mode 3 reaches deep.
    assert energy_depth(dual_20, dual_20[0]) <= 650
    assert 1050 <= energy_depth(dual_20, dual_20[2]) <= 1950


def test_cutoff_filter(dual_20):
    kept = cutoff_filter(dual_20, 800.0)
    assert 0 < len(kept) < len(dual_20)
    assert all(m.turning_depth < 800.0 for m in kept)
    assert len(cutoff_filter(dual_20, 5000.0)) == len(dual_20)
    with pytest.raises(ValueError):
        cutoff_filter(dual_20, 0.0)


def test_modeset_json(dual_20, tmp_path):
    p = tmp_path / "m.json"
    dual_20.save_json(p)
    d = json.loads(p.read_text())
    assert d["frequency_hz"] == 20.0 and len(d["modes"]) == len(dual_20)
    assert len(d["modes"][0]["psi"]) == len(d["z_m"])
    assert {"index", "k_radpm", "alpha_npm", "vg_mps", "turning_depth_m"} <= set(d["modes"][0])


def test_eigenfunction_csv(dual_20, tmp_path):
    p = tmp_path / "e.csv"
    dual_20.save_eigenfunction_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["z_m", "psi_mode1", "psi_mode2"]
    assert float(lines[-1].split(",")[0]) == pytest.approx(fixtures.WATER_DEPTH)


def test_table_tracking_and_monotone_k(dual_table):
    for i in range(dual_table.n_modes):
        k = dual_table.k[i]
        ok = np.isfinite(k)
        assert np.all(np.diff(k[ok]) > 0)
    assert list(dual_table.labels[:3]) == [1, 2, 3]


def test_table_csv_round_trip(dual_table, tmp_path):
    p = tmp_path / "t.csv"
    dual_table.band(20, 30).save_csv(p)
    back = load_table_csv(p)
    ref = dual_table.band(20, 30)
    np.testing.assert_allclose(back.frequencies, ref.frequencies)
    np.testing.assert_allclose(back.vg[0], ref.vg[0], rtol=1e-8)


@settings(max_examples=15, deadline=None)
@given(
    c=st.floats(1450, 1550),
    depth=st.floats(100, 400),
    f=st.floats(20, 60),
)
def test_isovelocity_property(c, depth, f):
    wg = Waveguide(SoundSpeedProfile([0.0, depth], [c, c]), depth, bottom_model=BottomModel.RIGID)
    ms = group_velocity_perturbation(solve_modes(wg, f, 4, dz=depth / 800), wg)
    m = np.arange(1, len(ms) + 1)
    exact = np.sqrt((2 * np.pi * f / c) ** 2 - ((m - 0.5) * np.pi / depth) ** 2)
    np.testing.assert_allclose(ms.wavenumbers, exact, rtol=5e-4)
    for i, mode in enumerate(ms):
        assert sign_changes(mode.psi) == i
        assert mode.group_velocity <= c * (1 + 1e-9)


def test_table_respects_max_modes(dual_wg):
    t = dispersion_table(dual_wg, 20.0, 22.0, 1.0, max_modes=3, dz=1.4)
    assert t.k.shape[1] == 3
    assert np.all(np.sum(np.isfinite(t.k), axis=0) <= 3)
