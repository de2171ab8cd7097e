from pathlib import Path

import numpy as np
import pytest

from penalty_ipg import make_rng

DATA = Path(__file__).parent / "data"
ROCKET = DATA / "rocket_384x512.pgm"


def toy_image(size=4, seed=0):
    """Smooth ramp plus mild texture, values in [0, 1]."""
    rng = make_rng(100 + seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    return np.clip(0.3 + 0.4 * xx + 0.2 * yy + 0.1 * rng.uniform(-1, 1, (size, size)), 0, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def rocket():
    from penalty_ipg.imageio import read_pgm

    return read_pgm(ROCKET)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{verdict}] {title}: {detail}")
