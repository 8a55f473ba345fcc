import numpy as np
import pytest

from anisolab.grid import Grid
from anisolab.bands import Bands

TWO_PI = 2.0 * np.pi


@pytest.fixture
def grid16():
    return Grid((TWO_PI, TWO_PI, TWO_PI), (16, 16, 16))


@pytest.fixture
def grid24():
    # anisotropic box: tall vertical period, so horizontal and vertical
    # wavenumber ladders differ
    return Grid((TWO_PI, TWO_PI, 2.0 * TWO_PI), (24, 24, 24))


@pytest.fixture
def bands24(grid24):
    return Bands(grid24)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


_CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    """Collects one pass/fail line per acceptance criterion; the lines
    are replayed in the terminal summary so they survive capture."""
    def record(line: str):
        _CRITERION_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
