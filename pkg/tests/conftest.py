import math

import numpy as np
import pytest

from collapsesim.core import CONST, Grid


@pytest.fixture
def unit_grid():
    return Grid.centered(20.0, 1024)


def free_gaussian_on_grid(grid, sigma0, x0, k0, mass, t, hbar=CONST.hbar):
    """Analytic free-particle Gaussian at time t, written out independently of the package."""
    a0 = 1.0 / (4.0 * sigma0**2)
    at = a0 / (1.0 + 2j * hbar * a0 * t / mass)
    xc = x0 + hbar * k0 * t / mass
    x = grid.x
    psi = np.exp(-at * (x - xc) ** 2 + 1j * k0 * (x - xc) + 1j * k0 * xc)
    return psi / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)


# Filled by test_acceptance.py; printed once at the end of the session.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
