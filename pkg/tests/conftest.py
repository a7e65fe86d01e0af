from __future__ import annotations

from pathlib import Path

import pytest

from emojisent.lexicon import load_lexicon

DATA = Path(__file__).parent / "data"

_acceptance: dict[str, str] = {}


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def fixture_lexicon():
    return load_lexicon(DATA / "fixture_lexicon.tsv")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance[name] = "PASS" if report.passed else "FAIL"
    elif report.skipped:
        _acceptance[name] = "SKIP"
    elif report.failed:
        _acceptance[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance.items():
        terminalreporter.write_line(f"{outcome:4}  {name}")
