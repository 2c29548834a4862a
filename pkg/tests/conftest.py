import pytest

from vacantbits.gcheap import Heap
from vacantbits.tagcore import Arena
from vacantbits.zint import ZContext


@pytest.fixture
def arena():
    a = Arena()
    yield a
    a.close()


@pytest.fixture
def ctx(arena):
    return ZContext(arena)


@pytest.fixture
def heap(arena):
    return Heap(arena)


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
