import numpy as np
import pytest

from planarcycles.examples import FIGURE2, build_constant_curves, build_harmonic, build_section3


@pytest.fixture(scope="session")
def fig2():
    return build_section3(FIGURE2)


@pytest.fixture(scope="session")
def vdp():
    return build_constant_curves(np.sqrt(3.0))


@pytest.fixture(scope="session")
def harmonic():
    return build_harmonic()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
