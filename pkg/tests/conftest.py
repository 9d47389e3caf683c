import numpy as np
import pytest

from hfitensor.constants import lookup_isotope
from hfitensor.volumetric import AtomSite, Cell, synth_gaussian


@pytest.fixture(scope="session")
def h1():
    return lookup_isotope("H", 1)


@pytest.fixture(scope="session")
def c13():
    return lookup_isotope("C", 13)


@pytest.fixture(scope="session")
def gaussian96():
    """Unit-norm sigma = 1 bohr Gaussian at the center of a 12 bohr box, 96^3 nodes."""
    return synth_gaussian([6.0, 6.0, 6.0], 1.0, 1.0, Cell.cubic(12.0), (96, 96, 96))


@pytest.fixture(scope="session")
def center_site():
    return AtomSite(1, [6.0, 6.0, 6.0], "H1")


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


# one line per acceptance criterion, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
