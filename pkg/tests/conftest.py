import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

from dbnwp import dataset as ds  # noqa: E402


@pytest.fixture(scope="session")
def small_records():
    return ds.synthesize(400, seed=3)


@pytest.fixture(scope="session")
def small_samples(small_records):
    return ds.build_samples(small_records)


_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.skipped):
        for key, value in report.user_properties:
            if key == "acceptance":
                status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
                _ACCEPTANCE_LINES.append(f"[{status}] {value}")
        if report.skipped and report.when == "setup" and "acceptance" in report.nodeid:
            _ACCEPTANCE_LINES.append(f"[SKIP] {report.nodeid.split('::')[-1]}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
