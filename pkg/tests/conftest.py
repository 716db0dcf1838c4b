import math

import numpy as np
import pytest
from hypothesis import settings

from neumann_waves.core import build_grid, grid_for_ratio

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

DOMAIN_L = 10 * math.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return build_grid(1.0, 1.0, 11, 21)


@pytest.fixture
def reference_grid():
    return grid_for_ratio(DOMAIN_L, 20.0, 158, 0.5)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and fail the test when the criterion fails."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
