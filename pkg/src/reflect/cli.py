"""Command line entry point: ``reflect simulate|analyze|eval|correct``.

Exit codes: 0 ok, 1 pipeline error, 2 input error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import load_config
from .log_model import LogError, load_log
from .reason import (
    BackendFailure,
    CorrectionPlan,
    ExplanationReport,
    make_backend,
    plan_correction,
    report_bundle,
    run_progressive,
)
from .sim_eval import SCENARIOS, evaluate, generate, get_scenario
from .summary import summarize

EXIT_PIPELINE = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _backend(uri: str):
    try:
        return make_backend(uri)
    except (ValueError, OSError, BackendFailure) as exc:
        _fail(EXIT_INPUT, str(exc))


def _load(path: str):
    try:
        return load_log(path)
    except (LogError, OSError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot load log {path}: {exc}")


def _config(path: str | None):
    try:
        return load_config(path)
    except (OSError, ValueError) as exc:
        _fail(EXIT_INPUT, f"bad config: {exc}")


def read_suite(path: str) -> list[str]:
    """Scenario names from a JSON list / ``{"scenarios": [...]}`` or one name per line."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        names = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    else:
        names = data["scenarios"] if isinstance(data, dict) else data
    unknown = [n for n in names if n not in SCENARIOS]
    if unknown:
        raise InputError(f"unknown scenarios: {', '.join(unknown)}")
    if not names:
        raise InputError("suite is empty")
    return list(names)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log pipeline details to stderr.")
def main(verbose: bool):
    """Failure explanation and correction for robot execution logs."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--scenario", required=True, help=f"One of: {', '.join(SCENARIOS)}")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def simulate(scenario: str, seed: int, out: str):
    """Write a simulated log bundle."""
    try:
        sc = get_scenario(scenario)
    except KeyError as exc:
        _fail(EXIT_INPUT, exc.args[0])
    path = generate(sc, seed, out)
    click.echo(str(path))


@main.command()
@click.option("--log", "log_dir", required=True, type=click.Path())
@click.option("--backend", required=True, help="oracle:, replay:FILE or an http(s) URL")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--no-correct", is_flag=True, help="Skip correction planning.")
def analyze(log_dir: str, backend: str, out: str, config_path: str | None, no_correct: bool):
    """Explain the failure in a log (and plan a correction)."""
    cfg = _config(config_path)
    slog = _load(log_dir)
    llm = _backend(backend)
    try:
        summaries = summarize(slog, cfg)
        report = run_progressive(slog, summaries, llm)
        plan = None
        if report.failure_type != "none" and not no_correct:
            plan = plan_correction(
                slog.task, report, summaries.final_graph, llm, objects=slog.objects, threshold=cfg.grounding_threshold
            )
    except Exception as exc:
        _fail(EXIT_PIPELINE, f"{type(exc).__name__}: {exc}")
    Path(out).write_text(report_bundle(report, plan), encoding="utf-8")
    click.echo(f"{report.failure_type}: {report.explanation}".rstrip(": "))


@main.command("eval")
@click.option("--suite", required=True, type=click.Path())
@click.option("--backend", required=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--no-correct", is_flag=True, help="Disable correction (Co-plan counts as failed).")
@click.option("--config", "config_path", type=click.Path(), default=None)
def eval_cmd(suite: str, backend: str, out: str, seed: int, no_correct: bool, config_path: str | None):
    """Run a scenario suite and write Loc / Co-plan metrics."""
    cfg = _config(config_path)
    try:
        names = read_suite(suite)
    except (OSError, InputError, KeyError, TypeError) as exc:
        _fail(EXIT_INPUT, f"bad suite {suite}: {exc}")
    llm = _backend(backend)
    result = evaluate([get_scenario(n) for n in names], llm, seed, correction=not no_correct, cfg=cfg)
    result.save(out)
    data = result.to_json()
    click.echo(f"Loc {data['loc']}  Co-plan {data['coplan']}  type accuracy {data['type_accuracy']}")


@main.command()
@click.option("--log", "log_dir", required=True, type=click.Path())
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--backend", required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Defaults to stdout.")
@click.option("--config", "config_path", type=click.Path(), default=None)
def correct(log_dir: str, report_path: str, backend: str, out: str | None, config_path: str | None):
    """Plan a grounded correction for an existing report."""
    cfg = _config(config_path)
    slog = _load(log_dir)
    try:
        data = json.loads(Path(report_path).read_text(encoding="utf-8"))
        report = ExplanationReport.from_json(data.get("report", data))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _fail(EXIT_INPUT, f"bad report {report_path}: {exc}")
    llm = _backend(backend)
    try:
        summaries = summarize(slog, cfg)
        if hasattr(llm, "bind"):
            llm.bind(summaries)
        plan: CorrectionPlan = plan_correction(
            slog.task, report, summaries.final_graph, llm, objects=slog.objects, threshold=cfg.grounding_threshold
        )
    except Exception as exc:
        _fail(EXIT_PIPELINE, f"{type(exc).__name__}: {exc}")
    text = report_bundle(report, plan)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    for a in plan.actions:
        click.echo(a.template)
    if not out:
        click.echo(text, nl=False)


if __name__ == "__main__":
    main()
