"""Shared fixtures: the bundled dataset, one full default run, reduced runs."""
from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from magec.analysis import AnalysisRequest, AnalysisResult, run_analysis
from magec.dataset import Dataset, load_sample_dataset
from magec.sampler import McmcConfig

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def sample_dataset() -> Dataset:
    return load_sample_dataset()


@dataclass(frozen=True)
class TimedRun:
    result: AnalysisResult
    wall_seconds: float


@pytest.fixture(scope="session")
def default_run(sample_dataset) -> TimedRun:
    """The flagship run: defaults (3 x 100k / 50k burn-in / thin 5, seed
    20240601), both fits, serial chains. Shared because it costs ~30 s."""
    start = time.perf_counter()
    result = run_analysis(AnalysisRequest(dataset=sample_dataset))
    return TimedRun(result=result, wall_seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def reduced_result(sample_dataset) -> AnalysisResult:
    """Structurally complete but cheap run for plumbing-level tests."""
    config = McmcConfig(n_chains=2, n_iter=2000, burn_in=1000, thin=2)
    return run_analysis(AnalysisRequest(dataset=sample_dataset, mcmc_config=config))


@pytest.fixture
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""

    def record(criterion: str, passed: bool, detail: str) -> None:
        status = "PASS" if passed else "FAIL"
        _acceptance_lines.append(f"{status}  {criterion}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
