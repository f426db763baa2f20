import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modewarp.errors import RangingError
from modewarp.ranging import (
    Anchor,
    EquivalentSpeeds,
    PeakPolicy,
    RangeMethod,
    dispersion_duration,
    equivalent_speeds_duration,
    estimate_range_duration,
    estimate_range_mode_pair,
    mode_pair_delay,
    mode_pair_speeds,
    pick_anchors,
)
from modewarp.synth import TimeSeries
from modewarp.tfr import Envelope, Peak, PeakList


def peaks(times):
    return PeakList(Peak(float(t), 1.0, 1.0, i) for i, t in enumerate(times))


def test_anchor_indices():
    assert [a.index(5) for a in Anchor] == [0, 1, 3, 4]


def test_pick_anchors_policies():
    pk = peaks([1.0, 2.0, 3.5, 4.0])
    assert pick_anchors(pk, PeakPolicy()) == (2.0, 4.0)
    assert pick_anchors(pk, PeakPolicy(Anchor.FIRST, Anchor.PENULTIMATE)) == (1.0, 3.5)
    with pytest.raises(RangingError):
        pick_anchors(peaks([1.0, 2.0]), PeakPolicy(Anchor.SECOND, Anchor.PENULTIMATE))


def test_speeds_validation():
    with pytest.raises(RangingError):
        EquivalentSpeeds()
    with pytest.raises(RangingError):
        EquivalentSpeeds(v_start=1500.0, v_end=1490.0, v_mode1=1.0, v_mode2=1.0)
    with pytest.raises(RangingError):
        EquivalentSpeeds(v_start=1500.0, v_end=-1.0)
    sp = EquivalentSpeeds(v_start=1500.0, v_end=1480.0)
    assert sp.method is RangeMethod.DURATION
    with pytest.raises(RangingError):
        estimate_range_duration(1.0, EquivalentSpeeds(v_start=1480.0, v_end=1500.0))


def test_duration_formula_and_report(tmp_path):
    sp = EquivalentSpeeds(v_start=1440.0, v_end=1425.0)
    r = 200e3
    dt = r * (1 / 1425.0 - 1 / 1440.0)
    est = estimate_range_duration(dt, sp, {"t_start_s": 1.0}, "abc")
    assert est.range_m == pytest.approx(r)
    est.save_json(tmp_path / "e.json")
    d = json.loads((tmp_path / "e.json").read_text())
    assert d["method"] == "duration" and d["env_hash"] == "abc" and d["speeds"]["v_end_mps"] == 1425.0


speeds = st.tuples(st.floats(1400, 1500), st.floats(0.5, 30)).map(lambda p: EquivalentSpeeds(v_start=p[0] + p[1], v_end=p[0]))


@settings(max_examples=60, deadline=None)
@given(speeds, st.floats(0.01, 10), st.floats(0.1, 10))
def test_duration_linear_and_monotone(sp, dt, a):
    r1 = estimate_range_duration(dt, sp).range_m
    assert estimate_range_duration(a * dt, sp).range_m == pytest.approx(a * r1, rel=1e-12)
    assert estimate_range_duration(dt * 1.01, sp).range_m > r1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=10, unique=True), st.floats(-1e3, 1e3))
def test_duration_translation_invariant(times, shift):
    times = sorted(times)
    pol = PeakPolicy(Anchor.FIRST, Anchor.LAST)
    a = dispersion_duration(peaks(times), pol)
    b = dispersion_duration(peaks(np.array(times) + shift), pol)
    assert b == pytest.approx(a, abs=1e-9)


def test_mode_pair_delay_from_separated_signals():
    fs = 200.0
    t = np.arange(0, 10, 1 / fs)
    burst = lambda c: np.exp(-(((t - c) / 0.1) ** 2)) * np.cos(2 * np.pi * 40 * t)  # noqa: E731
    m1, m2 = TimeSeries(fs, 100.0, burst(3.0)), TimeSeries(fs, 100.0, burst(4.2))
    assert mode_pair_delay([m1, m2]) == pytest.approx(1.2, abs=0.01)
    # shifting both signals leaves the delay unchanged
    s1, s2 = TimeSeries(fs, 250.0, m1.samples), TimeSeries(fs, 250.0, m2.samples)
    assert mode_pair_delay([s1, s2]) == pytest.approx(mode_pair_delay([m1, m2]))
    with pytest.raises(RangingError):
        mode_pair_delay([m1, m1])


def test_mode_pair_delay_envelope_fallback():
    t = np.arange(0, 5, 0.01)
    v = sum(a * np.exp(-(((t - c) / 0.05) ** 2)) for a, c in ((1, 1.0), (0.8, 2.0), (0.9, 3.3)))
    assert mode_pair_delay(Envelope(t, v)) == pytest.approx(1.3, abs=0.02)


def test_mode_pair_guard(dual_table, single_table):
    sp = mode_pair_speeds(dual_table)
    assert sp.v_mode1 - sp.v_mode2 >= 1.0
    with pytest.raises(RangingError, match="dual-channel"):
        mode_pair_speeds(single_table)
    with pytest.raises(RangingError):
        mode_pair_speeds(dual_table, band=(200.0, 300.0))


def test_mode_pair_formula(dual_table):
    sp = mode_pair_speeds(dual_table)
    r = 300e3
    dt = r * (1 / sp.v_mode2 - 1 / sp.v_mode1)
    est = estimate_range_mode_pair(dt, dual_table)
    assert est.range_m == pytest.approx(r)
    assert est.method is RangeMethod.MODE_PAIR and est.env_hash == dual_table.env_hash


def test_equivalent_speeds_options(dual_table):
    mean = equivalent_speeds_duration(dual_table)
    ext = equivalent_speeds_duration(dual_table, aggregate="extreme")
    assert ext.v_start >= mean.v_start and ext.v_end <= mean.v_end
    assert 1 not in mean.modes
    refr = equivalent_speeds_duration(dual_table, aggregate="extreme", max_turning_depth=2000.0)
    assert refr.v_start <= ext.v_start
    with pytest.raises(ValueError):
        equivalent_speeds_duration(dual_table, aggregate="median")
    with pytest.raises(RangingError):
        equivalent_speeds_duration(dual_table, mode_exclusions=set(range(1, 30)))
