"""Log generation, plan execution and Loc / Co-plan evaluation."""

from __future__ import annotations

import copy
import json
import logging
import tempfile
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..config import Config
from ..log_model import (
    AudioEvent,
    Camera,
    Frame,
    GoalPredicate,
    ObjectDecl,
    RobotState,
    SensoryLog,
    Timestamp,
    attach_audio,
    load_log,
    parse_action,
    save_log,
)
from ..reason import (
    CorrectionPlan,
    ExplanationReport,
    LlmBackend,
    plan_correction,
    run_progressive,
)
from ..summary import summarize
from .scenarios import CAMERA_INTRINSICS, CAMERA_POSE, Scenario
from .world import IllegalTransition, World

log = logging.getLogger(__name__)

JITTER_SD = 0.0005
MOTION_VERBS = ("pick_up", "put_in", "put_on")


class ScriptConflict(ValueError):
    pass


def scenario_camera() -> Camera:
    fx, fy, cx, cy = CAMERA_INTRINSICS
    return Camera(fx, fy, cx, cy, CAMERA_POSE.copy())


def check_script(sc: Scenario) -> None:
    ts = [e.t for e in sc.events]
    if ts != sorted(ts):
        raise ScriptConflict(f"{sc.name}: events are not in time order")
    prev_end = -1
    for s in sc.steps:
        if s.start != prev_end + 1 or s.end < s.start:
            raise ScriptConflict(f"{sc.name}: step spans must be contiguous from 00:00")
        prev_end = s.end
    if prev_end >= sc.duration:
        raise ScriptConflict(f"{sc.name}: plan runs past the end of the log")
    moved: set[tuple[int, str]] = set()
    motions = [(e.t, e.target) for e in sc.events if e.kind in ("move", "drop")]
    for s in sc.steps:
        pa = sc.task.plan[s.index]
        if pa.action_verb in MOTION_VERBS:
            motions.append((s.end, pa.arguments[0]))
    for key in motions:
        if key in moved:
            raise ScriptConflict(f"{sc.name}: {key[1]} moved twice at {Timestamp(key[0])}")
        moved.add(key)
    if sc.annotation is not None:
        for lo, hi in sc.annotation.ranges:
            if not (0 <= lo.seconds <= hi.seconds < sc.duration):
                raise ScriptConflict(f"{sc.name}: annotation range {lo}-{hi} outside the log")


def _span_at(sc: Scenario, t: int):
    for s in sc.steps:
        if s.start <= t <= s.end:
            return s
    return sc.steps[-1]


def _robot_state(sc: Scenario, world: World, t: int) -> RobotState:
    span = _span_at(sc, t)
    ended = t >= span.end
    text = None
    if not ended and t <= span.end - 2:
        args = sc.task.plan[span.index].arguments
        target = world.objects[args[-1]].name if args and args[-1] in world.objects else args[-1]
        text = f"Move to {target}"
    held = world.held
    return RobotState(held is None, held, span.index, "ended" if ended else "executing", text)


def _apply_event(world: World, ev) -> None:
    if ev.kind in ("move", "drop"):
        if ev.kind == "drop" and world.held != ev.target:
            return
        world.move(ev.target, ev.placement)
        if ev.spill:
            world.empty(ev.target)
    elif ev.kind == "state":
        old, new = ev.attr
        world.swap_attr(ev.target, old, new)
    else:
        raise ScriptConflict(f"unknown event kind {ev.kind!r}")


def simulate(sc: Scenario, seed: int = 0) -> tuple[SensoryLog, World]:
    """Run the script frame by frame; returns the log and the end-state world."""
    check_script(sc)
    world = World(copy.deepcopy(sc.objects), sc.placements)
    decls = {o.object_id: ObjectDecl(o.object_id, o.class_name, o.name, i + 1) for i, o in enumerate(sc.objects)}
    jitter = {oid: np.random.default_rng([seed, zlib.crc32(oid.encode())]) for oid in decls}
    offsets: dict[str, np.ndarray] = {}
    events = list(sc.events)
    frames = []
    for t in range(sc.duration):
        while events and events[0].t == t:
            _apply_event(world, events.pop(0))
        for s in sc.steps:
            if s.end == t:
                pa = sc.task.plan[s.index]
                try:
                    world.apply_action(pa.action_verb, pa.arguments, s.slot)
                except IllegalTransition as exc:
                    log.debug("%s %s: %s", sc.name, Timestamp(t), exc)
        visible = set(world.present())
        if sc.visibility is not None:
            visible &= sc.visibility(t)
        points, states = {}, {}
        for oid in decls:
            if oid not in visible:
                continue
            pts = world.points(oid)
            if oid not in offsets or len(offsets[oid]) != len(pts):
                offsets[oid] = jitter[oid].normal(0.0, JITTER_SD, pts.shape)
            points[oid] = np.round(pts + offsets[oid], 6)
            if world.state(oid):
                states[oid] = world.state(oid)
        frames.append(Frame(Timestamp(t), _robot_state(sc, world, t), states, points))
    audio = tuple(AudioEvent(Timestamp(a), Timestamp(b), label) for a, b, label in sc.audio)
    slog = SensoryLog(sc.task, decls, attach_audio(frames, audio), audio, scenario_camera())
    return slog, world


def generate(sc: Scenario, seed: int, out: str | Path) -> Path:
    slog, _ = simulate(sc, seed)
    return save_log(slog, out)


def execute_plan(
    world: World,
    plan: CorrectionPlan | Sequence[str],
    goal_predicates: Iterable[GoalPredicate],
) -> tuple[World, bool]:
    """Apply grounded steps to a copy of ``world``; success iff every goal predicate holds.

    Raises IllegalTransition on the first step the world refuses.
    """
    templates = [a.template for a in plan.actions] if isinstance(plan, CorrectionPlan) else list(plan)
    w = world.copy()
    for tpl in templates:
        verb, args = parse_action(tpl)
        w.apply_action(verb, args)
    goals = list(goal_predicates)
    return w, bool(goals) and all(w.holds(p) for p in goals)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class ScenarioResult:
    name: str
    expected_type: str
    predicted_type: str | None = None
    failure_times: list[str] = field(default_factory=list)
    loc_correct: bool | None = None
    coplan_success: bool | None = None
    correction: list[str] = field(default_factory=list)
    explanation: str = ""
    error: str | None = None
    seconds: float = 0.0

    @property
    def type_correct(self) -> bool:
        return self.predicted_type == self.expected_type


def _pct(flags: list[bool]) -> float | None:
    return round(100.0 * sum(flags) / len(flags), 2) if flags else None


@dataclass
class EvalResult:
    results: list[ScenarioResult]

    @property
    def failures(self) -> list[ScenarioResult]:
        return [r for r in self.results if r.expected_type != "none"]

    @property
    def loc(self) -> float | None:
        return _pct([bool(r.loc_correct) for r in self.failures])

    @property
    def coplan(self) -> float | None:
        return _pct([bool(r.coplan_success) for r in self.failures])

    @property
    def type_accuracy(self) -> float | None:
        return _pct([r.type_correct for r in self.results])

    def to_json(self) -> dict:
        def fmt(v):
            return "N/A" if v is None else v

        return {
            "loc": fmt(self.loc),
            "coplan": fmt(self.coplan),
            "type_accuracy": fmt(self.type_accuracy),
            "scenarios": [
                {
                    "name": r.name,
                    "expected_type": r.expected_type,
                    "predicted_type": r.predicted_type,
                    "failure_times": r.failure_times,
                    "loc_correct": r.loc_correct,
                    "coplan_success": r.coplan_success,
                    "correction": r.correction,
                    "explanation": r.explanation,
                    "error": r.error,
                }
                for r in self.results
            ],
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")
        return path


def analyze_log(slog: SensoryLog, backend: LlmBackend, cfg: Config = Config()) -> tuple[ExplanationReport, object]:
    summaries = summarize(slog, cfg)
    return run_progressive(slog, summaries, backend), summaries


def evaluate_one(sc: Scenario, backend: LlmBackend, seed: int = 0, correction: bool = True, cfg: Config = Config()) -> ScenarioResult:
    res = ScenarioResult(sc.name, sc.expected_type)
    t0 = time.perf_counter()
    try:
        slog, end_world = simulate(sc, seed)
        with tempfile.TemporaryDirectory() as tmp:
            slog = load_log(save_log(slog, Path(tmp) / sc.name))
        report, summaries = analyze_log(slog, backend, cfg)
        res.predicted_type = report.failure_type
        res.explanation = report.explanation
        res.failure_times = [t.render() for t in report.failure_times]
        if sc.annotation is not None:
            res.loc_correct = any(sc.annotation.contains(t) for t in report.failure_times)
            res.coplan_success = False
            if correction and report.failure_type != "none":
                plan = plan_correction(
                    slog.task, report, summaries.final_graph, backend, objects=slog.objects,
                    threshold=cfg.grounding_threshold,
                )
                res.correction = [a.template for a in plan.actions]
                try:
                    _, res.coplan_success = execute_plan(end_world, plan, slog.task.goal_predicates)
                except IllegalTransition as exc:
                    # a refused step is a failed correction, not a pipeline error
                    log.info("%s: correction refused: %s", sc.name, exc)
    except Exception as exc:  # recorded per scenario; the suite keeps going
        res.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s: %s", sc.name, res.error)
    res.seconds = time.perf_counter() - t0
    return res


def evaluate(
    scenarios: Sequence[Scenario],
    backend: LlmBackend,
    seed: int = 0,
    correction: bool = True,
    cfg: Config = Config(),
) -> EvalResult:
    return EvalResult([evaluate_one(sc, backend, seed, correction, cfg) for sc in scenarios])
