from __future__ import annotations

import random

import pytest

from gtrmol.fixtures import corpus

# (criterion number, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


@pytest.fixture(scope="session")
def molecules():
    """The shared 500-molecule corpus (5 to 20 heavy atoms)."""
    return corpus(seed=20240611, count=500)


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {detail}")
