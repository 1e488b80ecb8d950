import math

import numpy as np
import pytest

from manifold_control.control import PlantSpec, build_controlled_system
from manifold_control.manifold import make_spec

U_TEXT = "x2*exp(-2*x1)"
P_TEXT = ["x1 + x2 + exp(-t)", "x1*x2 + exp(-2*t)"]
Q_TEXT = [["1", "0"], ["0", "1"]]
GAMMA_GRID = [0.25 * k for k in range(21)]

# Drift correction in a1 for constant q00: the worked example prints +2 q00^2 exp(-4 x1);
# 1/2 J(B) B with B = q00 exp(-2 x1) (1, 2 x2) gives -q00^2 exp(-4 x1).
PRINTED_CORRECTION = 2.0
DERIVED_CORRECTION = -1.0


def closed_form_g(x, gamma):
    """Jump map of the two-state example in closed form."""
    x1, x2 = x
    return np.array([0.5 * math.log(2 * gamma + math.exp(2 * x1)) - x1, 2 * x2 * gamma * math.exp(-2 * x1)])


def u_example(x):
    return x[1] * math.exp(-2 * x[0])


@pytest.fixture(scope="session")
def paper_spec():
    return make_spec(2, 1, U_TEXT, h_rows=[["0", "1", "0"]])


@pytest.fixture(scope="session")
def paper_plant():
    return PlantSpec.from_text(P_TEXT, Q_TEXT)


@pytest.fixture(scope="session")
def paper_system(paper_spec, paper_plant):
    return build_controlled_system(paper_spec, paper_plant, (0.0, 1.0), 0.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
