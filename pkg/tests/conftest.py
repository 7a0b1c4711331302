from pathlib import Path

import numpy as np
import pytest

from gpbag.dataset import ColumnKind, Dataset
from gpbag.gp import GpConfig

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

# small GP budget for unit tests
TINY_GP = GpConfig(population_size=40, generations=6, subpopulations=4)


def make_dataset(X, y, kinds=None, name="toy"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    kinds = kinds or (ColumnKind.REAL,) * X.shape[1]
    return Dataset(X, np.asarray(y), tuple(kinds), name)


def separable_2d(n=80, seed=0):
    """Positives where x0 + x1 > 1.3 on the unit square, minority by construction."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = (X.sum(axis=1) > 1.3).astype(np.int8)
    return make_dataset(X, y, name="separable")


def margin_2d(n=60, seed=0, gap=(0.9, 1.2)):
    """Like :func:`separable_2d` but with an empty band between the classes."""
    rng = np.random.default_rng(seed)
    X = rng.random((4 * n, 2))
    s = X.sum(axis=1)
    X = X[(s > gap[1]) | (s < gap[0])][:n]
    return make_dataset(X, (X.sum(axis=1) > gap[1]).astype(np.int8), name="margin")


@pytest.fixture
def toy_separable():
    return separable_2d()


@pytest.fixture(scope="session")
def yeast():
    from gpbag.dataset import load_csv
    return load_csv(DATA / "yeast_me3.csv", "class", "ME3")


@pytest.fixture(scope="session")
def ionosphere():
    from gpbag.dataset import load_csv
    return load_csv(DATA / "ionosphere.csv", "class", "b")


@pytest.fixture(scope="session")
def vowel0():
    from gpbag.dataset import load_csv
    return load_csv(DATA / "vowel0.csv", "class", "hid")


# acceptance criteria append "PASS ..."/"FAIL ..." lines here; echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
