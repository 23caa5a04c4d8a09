import sys

import numpy as np
import pytest

from extracop.generators import lattice


@pytest.fixture(scope="session")
def fcc():
    return lattice("fcc", 4)


@pytest.fixture(scope="session")
def bcc():
    return lattice("bcc", 4)


def icosahedron():
    phi = (1 + np.sqrt(5)) / 2
    v = []
    for a in (-1, 1):
        for b in (-phi, phi):
            v += [(0, a, b), (a, b, 0), (b, 0, a)]
    return np.array(v, dtype=float)


def pytest_terminal_summary(terminalreporter, config):
    module = sys.modules.get("test_acceptance")
    lines = config.stash.get(module.ACCEPTANCE_KEY, []) if module else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
