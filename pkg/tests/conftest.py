"""Shared fixtures: random monotone states and the acceptance report."""

from __future__ import annotations

import numpy as np
import pytest

from cfwd import GridFunction

# One line per acceptance criterion, printed after the run so the verdicts
# survive pytest's output capture.
ACCEPTANCE_RESULTS: list[str] = []


def record_criterion(num: int, description: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"{verdict} criterion {num:2d}: {description}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE_RESULTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


def random_monotone_values(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random non-decreasing vector; roughly half the draws contain ties."""
    raw = rng.standard_normal(n)
    if rng.random() < 0.5:
        raw = np.round(raw * 2) / 2
    return np.sort(raw)


def random_monotone(rng: np.random.Generator, n: int) -> GridFunction:
    return GridFunction(random_monotone_values(rng, n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260815)
