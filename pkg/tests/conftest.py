import numpy as np
import pytest

from sketchreg import DesignMatrix

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion(request):
    """Record a pass/fail line for an acceptance criterion.

    Usage: ``record_criterion(3, ok, "detail")`` then assert ``ok``.
    """

    def record(number, ok, detail=""):
        _ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_design(rng):
    """Full-rank 6 x 2 design with a noisy response."""
    x = rng.standard_normal((6, 2))
    y = x @ np.array([1.5, -0.5]) + 0.1 * rng.standard_normal(6)
    return DesignMatrix(x), y


@pytest.fixture
def design_6x6(rng):
    x = rng.standard_normal((12, 6))
    y = x @ rng.standard_normal(6) + 0.2 * rng.standard_normal(12)
    return DesignMatrix(x), y
