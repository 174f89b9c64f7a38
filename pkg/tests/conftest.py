"""Shared pytest configuration and fixtures."""

import pytest

from tests.fixtures.factories import make_config, make_dataset


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run slow acceptance benchmarks"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size training runs (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def toy_config():
    """Double-precision 16x16 model with d=8."""
    return make_config()


@pytest.fixture
def toy_dataset():
    """Small stripes dataset at 16x16 with validation splits."""
    return make_dataset()


@pytest.fixture
def workdir(tmp_path):
    return tmp_path
