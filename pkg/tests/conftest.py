import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from petransport.net import Network, length

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def two_circle():
    """Unit and sqrt(2) circles, equal split junction, damping on circle 0."""
    return Network.build([length(1), length(1, "SQRT2")], [[0.5, 0.5], [0.5, 0.5]], [(0.1, 0.4)])


@pytest.fixture
def three_circle():
    M = np.array([[0.3, -0.2, 0.25], [0.35, 0.4, -0.3], [-0.25, 0.3, 0.4]])
    return Network.build([length(1), length(1, "SQRT2"), length(1, "GOLDEN")], M, [(0.1, 0.5), (0.3, 1.2)])


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(capsys):
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
