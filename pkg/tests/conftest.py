import numpy as np
import pytest

from udwlab import oracle
from udwlab.modespace import CouplingFunction, Dispersion, Gaussian, ModeSpace

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    """Store one acceptance line; the terminal summary prints them all."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def gaussian_coupling(n=3, mass=0.0, sigma=1.0, lam=1.0):
    disp = Dispersion.massive(mass) if mass > 0 else Dispersion.massless()
    return CouplingFunction(ModeSpace(n, disp), Gaussian(sigma), lam)


@pytest.fixture(scope="session")
def modes3():
    return oracle.DiscreteModes([1.0, 1.6, 2.3], [0.25, 0.2, 0.15])


@pytest.fixture(scope="session")
def system3(modes3):
    # dimension 2 * 12**3 = 3456: dense diagonalization
    return oracle.build_hamiltonian(modes3, 0.3, 11)


@pytest.fixture(scope="session")
def modes2():
    return oracle.DiscreteModes([1.0, 1.6], [0.25, 0.2])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
