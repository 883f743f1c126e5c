import numpy as np
import pytest

from skewlangevin.geometry import Ball, smoothed_lp_ball
from skewlangevin.targets import QuadraticGaussian

TOY_COV = (0.25, 1.0, 4.0)
TOY_X0 = np.array([0.2, 0.3, 0.5])


@pytest.fixture
def ball():
    return Ball.unit(3)


@pytest.fixture
def lp_set():
    return smoothed_lp_ball(4, 0.2, 1.0)


@pytest.fixture
def toy_pot():
    return QuadraticGaussian.from_cov_diag(TOY_COV)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def line_scan_entry(x, d, constraint, t_max=10.0, coarse=1e-3, fine=1e-7):
    """First t on a grid with x - t d feasible, or None.

    A coarse scan locates the first feasible grid cell, a fine scan of the
    preceding cell pins the crossing to ``fine``.
    """
    t = np.arange(0.0, t_max + coarse, coarse)
    ok = np.asarray(constraint.contains(x[None] - t[:, None] * d[None]))
    if not ok.any():
        return None
    j = int(np.argmax(ok))
    if j == 0:
        return 0.0
    tf = np.arange(t[j - 1], t[j] + fine, fine)
    okf = np.asarray(constraint.contains(x[None] - tf[:, None] * d[None]))
    return float(tf[int(np.argmax(okf))])


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
