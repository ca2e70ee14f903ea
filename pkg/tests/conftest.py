"""Shared fixtures: cached closed-loop runs of the bundled scenarios and the
acceptance table printed at the end of the session."""
from __future__ import annotations

import time
from pathlib import Path

import pytest

from pcsafety import runner
from pcsafety.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

ACCEPTANCE = {}


class ScenarioRuns:
    """Runs each (scenario, controller) pair once per session."""

    def __init__(self):
        self._cache = {}

    def config(self, name):
        return load_config(CONFIGS / f"{name}.cfg")

    def get(self, name, kind=None):
        """``(setup, runs, seconds)``; ``kind`` defaults to the configured controller."""
        config = self.config(name)
        kind = kind or config.controller.type
        key = (name, kind)
        if key not in self._cache:
            start = time.perf_counter()
            setup, runs = runner.simulate(config, kind)
            self._cache[key] = (setup, runs, time.perf_counter() - start)
        return self._cache[key]

    def pc_runs(self):
        return [(key, run) for key, (_, runs, _) in self._cache.items() if key[1].startswith("pc_") for run in runs]


@pytest.fixture(scope="session")
def scenario_runs():
    return ScenarioRuns()


@pytest.fixture
def record():
    """``record(number, title, ok, detail)`` logs one acceptance line."""

    def _record(number, title, ok, detail=""):
        ACCEPTANCE[number] = (title, bool(ok), detail)
        print(f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if ok else 'FAIL'}  {title}  {detail}")
