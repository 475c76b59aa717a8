import shutil

import pytest
from essentials.folders import ensure_folder


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the long Monte Carlo checks.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="requires --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


try:
    shutil.rmtree("_test_files")
except OSError:
    pass

ensure_folder("_test_files")
