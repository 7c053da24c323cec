import numpy as np
import pytest

from pshglue.extension import GluingConfig, GluingProblem
from pshglue.potentials import VarietySpec, euclidean_potential, sine_gaussian_potential

ACCEPTANCE_LINES: list[str] = []


def flat_problem(amplitude=0.3, radius=2.0):
    """Z = {z2 = 0} in C^2, Phi = |z|^2, u0 = amplitude sin(Re z1) exp(-|z1|^2) on Z."""
    return GluingProblem(euclidean_potential(2), VarietySpec.linear([[0, 1]]),
                         sine_gaussian_potential(2, amplitude, 0), radius)


def flat_config(**changes):
    base = dict(epsilon=0.25, delta=0.1, c1=0.1, neighborhood_radius=0.5)
    base.update(changes)
    return GluingConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
