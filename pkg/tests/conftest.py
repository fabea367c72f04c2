import numpy as np
import pytest

from z3ro_sim.channel import synth_rayleigh


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rayleigh_set():
    return synth_rayleigh(32, 8, seed=3)


def random_channel(rng, m):
    return (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(line[1])
