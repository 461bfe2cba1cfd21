from __future__ import annotations

import functools
import logging
import time
from pathlib import Path

import pytest

from reflect.reason import OracleBackend, RecordingBackend, plan_correction, run_progressive
from reflect.sim_eval import all_scenarios, evaluate, get_scenario, simulate
from reflect.summary import summarize

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

logging.getLogger("reflect.log_model").setLevel(logging.ERROR)


@functools.lru_cache(maxsize=None)
def run_scenario(name: str, seed: int = 0):
    """(log, end world, summaries) for a shipped scenario, cached per session."""
    slog, world = simulate(get_scenario(name), seed)
    return slog, world, summarize(slog)


def oracle_for(summaries) -> OracleBackend:
    backend = OracleBackend()
    backend.bind(summaries)
    return backend


@functools.lru_cache(maxsize=None)
def recorded_prompts(name: str):
    """Every (system, user, completion) exchange of one oracle analysis plus correction."""
    slog, _, s = run_scenario(name)
    rec = RecordingBackend(OracleBackend())
    report = run_progressive(slog, s, rec)
    if report.failure_type != "none":
        plan_correction(slog.task, report, s.final_graph, rec, objects=slog.objects)
    return report, tuple((e["system"], e["user"], e["completion"]) for e in rec.entries)


def golden(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def suite_result():
    """One timed oracle evaluation over every shipped scenario."""
    t0 = time.perf_counter()
    result = evaluate(all_scenarios(), OracleBackend(), seed=0)
    return result, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
