import numpy as np
import pytest

from rfock.loops import unit_square


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def square():
    return unit_square()


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
