from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

DATA = Path(str(resources.files("constructminer.data")))
TEST_DATA = Path(__file__).parent / "data"


def load_fixture_doc(dataset: str) -> dict:
    with open(DATA / f"{dataset}_fixtures.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def test_data() -> Path:
    return TEST_DATA


class _CriterionRecorder:
    def __init__(self, results: list):
        self.results = results

    def __call__(self, number: int, title: str):
        return _Criterion(self.results, number, title)


class _Criterion:
    def __init__(self, results, number, title):
        self.results, self.number, self.title = results, number, title
        self.details = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number} [{status}] {self.title}"
        if self.details:
            line += f" ({self.details})"
        if exc_type is not None and exc is not None:
            line += f": {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        self.results.append((self.number, line))
        print(line)
        return False


def pytest_configure(config):
    config._criterion_results = []


@pytest.fixture
def criterion(request):
    return _CriterionRecorder(request.config._criterion_results)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
