from pathlib import Path

import numpy as np
import pytest

from gminpaint.imageio import load_image
from gminpaint.prior import default_model, learn_prior

DATA = Path(__file__).parent / "data"

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def camera64():
    return load_image(DATA / "camera64.pgm")


@pytest.fixture(scope="session")
def camera128():
    return load_image(DATA / "camera128.pgm")


@pytest.fixture(scope="session")
def corpus():
    return [load_image(p) for p in sorted((DATA / "natural").glob("*.pgm"))]


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def learned(corpus):
    return learn_prior(corpus, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
