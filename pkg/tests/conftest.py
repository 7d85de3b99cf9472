import sys
from pathlib import Path

import pytest

from bayes_cpd import Grid

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def grid():
    return Grid(512)


@pytest.fixture(scope="session")
def grid1025():
    return Grid(1025)
