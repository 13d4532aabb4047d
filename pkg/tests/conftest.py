"""Shared fixtures: the reference grids and corpus are expensive enough to
build once per session, and several suites lean on the same instances."""

import pytest

from areafun.experiments import corpus
from areafun.sphere import make_grid


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 8192)


@pytest.fixture(scope="session")
def grid4():
    return make_grid(4, 65536, seed=1)


@pytest.fixture(scope="session")
def grids(grid3, grid4):
    return {3: grid3, 4: grid4}


@pytest.fixture(scope="session")
def entries():
    return corpus()


@pytest.fixture(scope="session")
def by_label(entries):
    return {e.label: e for e in entries}
