import numpy as np
import pytest

from mirrorcoherence.interferometer import Scenario

_CRITERIA: dict[int, tuple[bool, str]] = {}


class CriterionLog:
    """Records one pass/fail line per acceptance criterion."""

    def record(self, number: int, passed: bool, detail: str):
        _CRITERIA[number] = (bool(passed), detail)
        return passed


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def small_scenario():
    """Half the default grid (dp = 1/128) for quicker pipeline checks; the
    position box still spans +-50 um."""
    return Scenario(n_points=2048)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
