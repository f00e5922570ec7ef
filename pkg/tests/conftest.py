import numpy as np
import pytest

from noisetomo import PhotonDistribution, SchemeParams


@pytest.fixture
def lab():
    """Operating point of the heralded single-photon experiment."""
    return SchemeParams(eta=0.15, transmissivity=0.9, overlap=0.45, signal_cutoff=3)


@pytest.fixture
def heralded():
    return PhotonDistribution.from_probs([0.095, 0.905])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import acceptance_runs

    if acceptance_runs.RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(acceptance_runs.RESULTS):
            terminalreporter.write_line(acceptance_runs.RESULTS[number])
