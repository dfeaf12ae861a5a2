import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ksns.spectral import Basis, Grid, SpectralField, dealias

settings.register_profile(
    "ksns", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ksns")


def random_field(grid: Grid, tag: Basis, rng: np.random.Generator, band_limited: bool = False) -> SpectralField:
    """Random real field; the k1=0 and Nyquist rows are made real."""
    c = rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)
    c[0] = c[0].real
    c[-1] = c[-1].real
    f = SpectralField(grid, tag, c)
    return dealias(f) if band_limited else f


@pytest.fixture
def grid16():
    return Grid(16, 9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance verdicts, one per criterion, echoed at the end of the session.
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
