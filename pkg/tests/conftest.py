import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(k, name, passed, detail)."""
    def record(k, name, passed, detail):
        ACCEPTANCE[k] = (name, bool(passed), detail)
        print(f"criterion {k:2d} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")
