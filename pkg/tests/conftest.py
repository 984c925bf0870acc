"""Shared pytest wiring: expensive-marker gate and the acceptance report.

Tests marked expensive (full frequency-hierarchy runs) are skipped
unless --run-expensive is given. Acceptance tests register one outcome
line per criterion through the acceptance_record fixture; the collected
lines are printed as a PASS/FAIL table at the end of the session.
"""

import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--run-expensive",
        action="store_true",
        default=False,
        help="run the slow stiff-ratio checks (minutes each)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-expensive"):
        return
    skip = pytest.mark.skip(reason="needs --run-expensive")
    for item in items:
        if "expensive" in item.keywords:
            item.add_marker(skip)


# (criterion, passed, detail) in execution order
_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_record():
    def record(criterion: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in _ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} {criterion}: {detail}")
