"""Progressive failure explanation, correction planning and action grounding."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..log_model import VERBS, GoalPredicate, ObjectDecl, PlannedAction, SensoryLog, TaskSpec, Timestamp, format_action, parse_action
from ..percepts import DimensionMismatch, EmbeddingProvider, LexicalProvider
from ..relations import ROBOT
from ..scene_graph import SceneGraph
from ..summary import Caption, EventSummary, SubgoalEntry, Summaries, render_state
from . import prompts
from .backends import BackendFailure, LlmBackend

log = logging.getLogger(__name__)

FAILURE_TYPES = ("execution", "planning", "none")
GROUNDING_THRESHOLD = 0.5


class UnparseableAnswer(ValueError):
    pass


class NoTimestampInAnswer(ValueError):
    pass


class EmptyPlan(ValueError):
    pass


class UnknownVerb(ValueError):
    pass


@dataclass(frozen=True)
class VerificationResult:
    subgoal_index: int
    satisfied: bool
    raw_answer: str


@dataclass(frozen=True)
class ExplanationReport:
    failure_type: str
    explanation: str = ""
    failure_times: tuple[Timestamp, ...] = ()
    failed_subgoal: int | None = None
    verifications: tuple[VerificationResult, ...] = ()

    def __post_init__(self):
        if self.failure_type not in FAILURE_TYPES:
            raise ValueError(f"unknown failure type {self.failure_type!r}")
        if self.failure_type == "execution" and self.failed_subgoal is None:
            raise ValueError("execution failures name the failed subgoal")
        if self.failure_type == "none" and self.explanation:
            raise ValueError("a run without failure carries no explanation")

    def to_json(self) -> dict:
        return {
            "failure_type": self.failure_type,
            "explanation": self.explanation,
            "failure_times": [t.render() for t in self.failure_times],
            "failed_subgoal": self.failed_subgoal,
            "verifications": [
                {"subgoal_index": v.subgoal_index, "satisfied": v.satisfied, "raw_answer": v.raw_answer}
                for v in self.verifications
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ExplanationReport":
        return cls(
            failure_type=data["failure_type"],
            explanation=data.get("explanation", ""),
            failure_times=tuple(Timestamp.parse(t) for t in data.get("failure_times", [])),
            failed_subgoal=data.get("failed_subgoal"),
            verifications=tuple(VerificationResult(**v) for v in data.get("verifications", [])),
        )


@dataclass(frozen=True)
class ExecutableAction:
    template: str
    verb: str = ""
    arguments: tuple[str, ...] = ()

    def __post_init__(self):
        verb, args = parse_action(self.template)
        if verb not in VERBS:
            raise UnknownVerb(verb)
        object.__setattr__(self, "verb", verb)
        object.__setattr__(self, "arguments", args)

    @classmethod
    def of(cls, verb: str, *args: str) -> "ExecutableAction":
        return cls(format_action(verb, args))


@dataclass(frozen=True)
class CorrectionPlan:
    raw_steps: tuple[str, ...]
    grounded_steps: tuple[tuple[ExecutableAction, float], ...]
    dropped_steps: tuple[tuple[str, float], ...] = ()
    completion: str = ""

    def __post_init__(self):
        if len(self.raw_steps) != len(self.grounded_steps):
            raise ValueError("every kept raw step needs exactly one grounded action")

    @property
    def actions(self) -> list[ExecutableAction]:
        return [a for a, _ in self.grounded_steps]

    def to_json(self) -> dict:
        return {
            "completion": self.completion,
            "raw_steps": list(self.raw_steps),
            "grounded_steps": [{"action": a.template, "score": round(s, 6)} for a, s in self.grounded_steps],
            "dropped_steps": [{"raw": r, "score": round(s, 6)} for r, s in self.dropped_steps],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "CorrectionPlan":
        return cls(
            raw_steps=tuple(data["raw_steps"]),
            grounded_steps=tuple((ExecutableAction(g["action"]), float(g["score"])) for g in data["grounded_steps"]),
            dropped_steps=tuple((d["raw"], float(d["score"])) for d in data.get("dropped_steps", [])),
            completion=data.get("completion", ""),
        )


# ---------------------------------------------------------------------------
# graph checks


def state_has(graph: SceneGraph, object_id: str, text: str) -> bool:
    node = graph.node(object_id)
    return node is not None and text in (node.state or "")


def oracle_verify(subgoal: PlannedAction, graph: SceneGraph) -> bool:
    """Rule-table check of one subgoal's expected outcome against a graph."""
    verb, args = subgoal.action_verb, subgoal.arguments
    if verb == "pick_up":
        return graph.has_edge(args[0], "inside_robot_gripper", ROBOT)
    if verb == "put_in":
        return graph.has_edge(args[0], "inside", args[1])
    if verb == "put_on":
        return graph.has_edge(args[0], "on_top_of", args[1])
    if verb == "toggle_on":
        return state_has(graph, args[0], "turned on")
    if verb == "toggle_off":
        return state_has(graph, args[0], "turned off")
    if verb == "open":
        return state_has(graph, args[0], "open")
    if verb == "close":
        return state_has(graph, args[0], "closed")
    if verb == "move_to":
        node = graph.node(args[0])
        return node is not None and node.visible_now
    if verb == "slice":
        return state_has(graph, args[0], "sliced")
    if verb == "crack":
        return state_has(graph, args[0], "cracked")
    if verb == "pour":
        return state_has(graph, args[1], "filled")
    raise UnknownVerb(verb)


def _parts(text: str | None) -> set[str]:
    return {p.strip() for p in (text or "").split(" and ") if p.strip()}


def predicate_holds(pred: GoalPredicate, graph: SceneGraph) -> bool:
    if pred.kind == "object_state":
        node = graph.node(pred.subject)
        return node is not None and _parts(pred.value) <= _parts(node.state)
    if pred.kind == "relation":
        return graph.has_edge(pred.subject, pred.value, pred.object)
    if pred.kind == "holding":
        return graph.held_object() == pred.subject
    if pred.kind == "not_holding":
        return graph.held_object() != pred.subject
    raise ValueError(f"unknown predicate kind {pred.kind!r}")


def unmet_predicates(task: TaskSpec, graph: SceneGraph) -> list[GoalPredicate]:
    return [p for p in task.goal_predicates if not predicate_holds(p, graph)]


# ---------------------------------------------------------------------------
# queries

_TIME_RE = re.compile(r"(?<!\d)(\d{2,}):([0-5]\d)(?!\d)")


def extract_times(text: str) -> list[Timestamp]:
    """Every MM:SS token, in order of appearance, without repeats."""
    out: list[Timestamp] = []
    for m in _TIME_RE.finditer(text):
        t = Timestamp(int(m.group(1)) * 60 + int(m.group(2)))
        if t not in out:
            out.append(t)
    return out


def parse_yes_no(answer: str) -> bool:
    a = answer.strip().lower()
    if a.startswith("yes"):
        return True
    if a.startswith("no"):
        return False
    raise UnparseableAnswer(f"expected a Yes/No answer, got {answer[:60]!r}")


def verify_subgoal(entry: SubgoalEntry, backend: LlmBackend) -> VerificationResult:
    system, user = prompts.verify_prompt(entry.subgoal_text, entry.caption.observation())
    answer = backend.complete(system, user)
    return VerificationResult(entry.index, parse_yes_no(answer), answer)


def explain_execution(
    task: TaskSpec,
    events: EventSummary,
    t_fail: Timestamp,
    backend: LlmBackend,
    fail_caption: Caption | None = None,
) -> str:
    at = events.at(t_fail) or fail_caption
    if at is None:
        raise ValueError(f"no caption at {t_fail}")
    system, user = prompts.execution_prompt(task.task_name, t_fail, events.before(t_fail), at)
    return backend.complete(system, user).strip()


def plan_steps(task: TaskSpec, entries: Sequence[SubgoalEntry] = ()) -> list[tuple[Timestamp | None, str]]:
    """Plan steps with their times: planned_end, else the executed end."""
    ends = {e.index: e.t for e in entries}
    return [(step.planned_end or ends.get(i), step.subgoal_text) for i, step in enumerate(task.plan)]


def explain_planning(
    task: TaskSpec,
    final: SceneGraph,
    backend: LlmBackend,
    entries: Sequence[SubgoalEntry] = (),
) -> tuple[str, Timestamp]:
    """Returns the explanation and the time the follow-up query points at.

    Raises NoTimestampInAnswer (carrying the explanation) when the
    follow-up reply has no MM:SS token.
    """
    system, user = prompts.planning_prompt(task.task_name, task.goal_text, render_state(final), plan_steps(task, entries))
    explanation = backend.complete(system, user).strip()
    system2, user2 = prompts.time_followup_prompt(user, explanation)
    reply = backend.complete(system2, user2)
    times = extract_times(reply)
    if not times:
        raise NoTimestampInAnswer(explanation)
    return explanation, times[0]


def run_progressive(slog: SensoryLog | None, summaries: Summaries, backend: LlmBackend) -> ExplanationReport:
    """Verify subgoals in order, then explain the first failure found."""
    task = (slog or summaries.log).task
    if hasattr(backend, "bind"):
        backend.bind(summaries)

    results = []
    for entry in summaries.subgoals.entries:
        try:
            res = verify_subgoal(entry, backend)
        except BackendFailure as exc:
            raise BackendFailure(f"verifying subgoal {entry.index} ({entry.subgoal_text!r}): {exc}") from exc
        results.append(res)
        if res.satisfied:
            continue
        try:
            text = explain_execution(task, summaries.events, entry.t, backend, entry.caption)
        except BackendFailure as exc:
            raise BackendFailure(f"explaining failure of subgoal {entry.index}: {exc}") from exc
        times = extract_times(text)
        if entry.t not in times:
            times.append(entry.t)
        return ExplanationReport("execution", text, tuple(times), entry.index, tuple(results))

    if not unmet_predicates(task, summaries.final_graph):
        return ExplanationReport("none", verifications=tuple(results))
    try:
        text, t = explain_planning(task, summaries.final_graph, backend, summaries.subgoals.entries)
        times: tuple[Timestamp, ...] = (t,)
    except NoTimestampInAnswer as exc:
        log.warning("follow-up answer carried no timestamp")
        text, times = str(exc), ()
    except BackendFailure as exc:
        raise BackendFailure(f"planning analysis: {exc}") from exc
    return ExplanationReport("planning", text, times, None, tuple(results))


# ---------------------------------------------------------------------------
# correction

_NUMBERING = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")


def split_steps(completion: str) -> list[str]:
    """Split on newlines and on commas outside parentheses; strip list markers."""
    steps = []
    for line in completion.splitlines():
        depth, cur = 0, []
        for ch in line:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth = max(0, depth - 1)
            if ch == "," and depth == 0:
                steps.append("".join(cur))
                cur = []
            else:
                cur.append(ch)
        steps.append("".join(cur))
    out = []
    for s in steps:
        s = _NUMBERING.sub("", s).strip().rstrip(".").strip()
        if s:
            out.append(s)
    return out


def embed_actions(actions: Sequence[ExecutableAction], provider: EmbeddingProvider) -> np.ndarray:
    m = np.stack([provider.embed_text(a.template) for a in actions])
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def ground_vector(e, matrix: np.ndarray) -> tuple[int, float]:
    """Argmax cosine against unit rows; first index wins ties."""
    v = np.asarray(e, dtype=float).ravel()
    if v.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"step embedding has {v.shape[0]} dims, actions have {matrix.shape[1]}")
    scores = matrix @ (v / np.linalg.norm(v))
    i = int(np.argmax(scores))
    return i, float(np.clip(scores[i], -1.0, 1.0))


def ground_action(
    raw: str,
    actions: Sequence[ExecutableAction],
    provider: EmbeddingProvider,
    matrix: np.ndarray | None = None,
) -> tuple[ExecutableAction, float]:
    if not actions:
        raise ValueError("no executable actions to ground against")
    key = raw.strip()
    for a in actions:
        if a.template == key:
            return a, 1.0
    if matrix is None:
        matrix = embed_actions(actions, provider)
    i, score = ground_vector(provider.embed_text(raw), matrix)
    return actions[i], score


def class_plan(task: TaskSpec, objects: Mapping[str, ObjectDecl] | None = None, final: SceneGraph | None = None) -> list[str]:
    """Initial plan as ``verb (class, class)`` lines."""

    def cls(oid: str) -> str:
        if objects and oid in objects:
            return objects[oid].class_name
        node = final.node(oid) if final is not None else None
        if node is not None:
            return node.class_name
        return oid.rpartition("-")[0] or oid

    return [format_action(s.action_verb, [cls(a) for a in s.arguments]) for s in task.plan]


def plan_correction(
    task: TaskSpec,
    report: ExplanationReport,
    final: SceneGraph,
    backend: LlmBackend,
    provider: EmbeddingProvider | None = None,
    objects: Mapping[str, ObjectDecl] | None = None,
    threshold: float = GROUNDING_THRESHOLD,
) -> CorrectionPlan:
    if report.failure_type == "none":
        raise ValueError("nothing to correct: the run did not fail")
    provider = provider or LexicalProvider()
    actions = [ExecutableAction(t) for t in task.executable_actions]
    system, user = prompts.correction_prompt(
        task.task_name, class_plan(task, objects, final), report.explanation, render_state(final), task.goal_text
    )
    completion = backend.complete(system, user)
    matrix = embed_actions(actions, provider) if actions else None
    kept, grounded, dropped = [], [], []
    for raw in split_steps(completion):
        action, score = ground_action(raw, actions, provider, matrix)
        if score < threshold:
            log.warning("dropping step %r: best match %r scores %.3f", raw, action.template, score)
            dropped.append((raw, score))
            continue
        kept.append(raw)
        grounded.append((action, score))
    if not grounded:
        raise EmptyPlan(f"no step of {completion.strip()[:80]!r} grounds to an executable action")
    return CorrectionPlan(tuple(kept), tuple(grounded), tuple(dropped), completion)


def report_bundle(report: ExplanationReport, plan: CorrectionPlan | None) -> str:
    data = {"report": report.to_json(), "correction": plan.to_json() if plan else None}
    return json.dumps(data, indent=1) + "\n"
