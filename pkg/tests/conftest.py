import functools

import pytest

from modewarp import fixtures
from modewarp.config import RunConfig
from modewarp.modes import dispersion_table
from modewarp.synth import Scenario, SourceWavelet, synthesize

# Filled by test_acceptance; printed once at the end of the run.
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def dual_wg():
    return fixtures.dual_channel_waveguide()


@pytest.fixture(scope="session")
def single_wg():
    return fixtures.single_duct_waveguide()


@pytest.fixture(scope="session")
def dual_table(dual_wg):
    return dispersion_table(dual_wg, 10.0, 100.0, 0.5, max_modes=10, dz=1.4)


@pytest.fixture(scope="session")
def single_table(single_wg):
    return dispersion_table(single_wg, 10.0, 100.0, 0.5, max_modes=10, dz=1.4)


@pytest.fixture(scope="session")
def default_cfg():
    return RunConfig.load()


@pytest.fixture(scope="session")
def synth_at(dual_wg):
    """Cached dual-channel synthesis: synth_at(range_km, modes=None, min_depth=None)."""

    @functools.lru_cache(maxsize=None)
    def make(range_km, modes=None, min_depth=None):
        r = range_km * 1e3
        sc = Scenario(fixtures.SOURCE_DEPTH, fixtures.RECEIVER_DEPTH, r, 250.0, fixtures.default_duration(r))
        return synthesize(dual_wg, sc, SourceWavelet(), (10.0, 100.0), max_modes=10, dz=1.4,
                          modes=modes, min_depth_on_path=min_depth)

    return make
