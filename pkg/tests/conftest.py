from pathlib import Path

import numpy as np
import pytest

from odte.data import Dataset, load_csv

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris():
    return load_csv(DATA / "iris.csv")


@pytest.fixture
def separable():
    """Two well separated 2-D blobs, 20 rows each."""
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(-3, 0.5, (20, 2)), rng.normal(3, 0.5, (20, 2))])
    y = np.repeat([0, 1], 20)
    return Dataset(X, y, ("A", "B"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
