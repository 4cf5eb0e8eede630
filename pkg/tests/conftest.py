import sys
from pathlib import Path

import numpy as np
import pytest

from waveiss.discretize import Grid
from waveiss.model import InitialData, PhysicalParams, ProfileSpec

sys.path.insert(0, str(Path(__file__).parent))

GOLDEN = PhysicalParams(a=1.0, c=1.0, mu=0.5, b=1.0, k=1.0, lam=1.0, sigma=0.5)


def bump_initial(variant: str):
    """Smooth compatible data: C-infinity bumps supported away from both ends."""

    def factory(grid: Grid) -> InitialData:
        theta = ProfileSpec("bump", center=0.6, width=0.3) if variant in ("C", "D") else None
        return InitialData.from_profiles(
            grid,
            ProfileSpec("bump", center=0.5, width=0.3),
            ProfileSpec("bump", amplitude=0.5, center=0.4, width=0.2),
            theta,
        )

    return factory


@pytest.fixture
def golden():
    return GOLDEN


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
