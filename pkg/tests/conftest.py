from __future__ import annotations

import os

import numpy as np
import pytest

DEFAULT_SEED = 20260415

_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; override the seed with HARDYWEAVE_SEED."""
    return np.random.default_rng(int(os.environ.get("HARDYWEAVE_SEED", DEFAULT_SEED)))


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, (title, []))
    entry[1].append("passed" if call.excinfo is None else "failed")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        status = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
