import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cauchylat.lattice_core import Basis2  # noqa: E402
from cauchylat.sampling import RngStream, sample_haar_lattice  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def haar():
    """``haar(seed, i)`` returns a Haar-random basis."""
    return lambda seed, i: sample_haar_lattice(RngStream(seed, i))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def basis(a, b, c, d) -> Basis2:
    return Basis2.from_rows([[a, b], [c, d]])


E = math.e
