"""Hierarchical summary: per-frame graphs, key-frame captions, subgoal ends.

Caption wire format (one item per line; prompts join lines with spaces)::

    MM:SS. Action: <action>.
    Visual observation: <obj (state)>, <obj>, ...
    <subj (state)> is <relation phrase> <obj (state)>.      (zero or more)
    <obj> is inside robot gripper.  |  nothing is inside robot gripper.
    Auditory observation: <label>, <label>.                 (only with audio)

The visual list names objects visible in the frame; relation sentences are
emitted for edges whose subject is visible. When nothing is visible the
second line is just ``Visual observation:``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .config import Config
from .geometry import MissingIntrinsics, SemanticPointCloud, aggregate
from .log_model import RobotState, SensoryLog, TaskSpec, Timestamp
from .percepts import EmbeddingProvider, LabelSet, summarize_audio
from .relations import ROBOT
from .scene_graph import ROBOT_NODE, GraphBuilder, SceneGraph, graph_equal, strip_local

GRAPH_CHANGED = "graph_changed"
ACTION_ENDED = "action_ended"
AUDIO_BOUNDARY = "audio_boundary"

RELATION_PHRASES = {
    "inside": "is inside",
    "on_top_of": "is on top of",
    "above": "is above",
    "below": "is below",
    "left_of": "is on the left of",
    "right_of": "is on the right of",
    "occluding": "is occluding",
    "near": "is near",
}

AudioSummary = list[tuple[Timestamp, Timestamp, str]]


class PlanIndexRegression(ValueError):
    pass


@dataclass(frozen=True)
class KeyFrame:
    t: Timestamp
    reason: frozenset[str]
    graph: SceneGraph
    action_text: str
    audio_labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.reason:
            raise ValueError("key frame needs at least one reason")


@dataclass(frozen=True)
class Caption:
    t: Timestamp
    text: str

    @property
    def lines(self) -> list[str]:
        return self.text.split("\n")

    def one_line(self) -> str:
        return " ".join(self.lines)

    def body(self) -> str:
        """Caption without the leading ``MM:SS. `` (starts at ``Action:``)."""
        line = self.one_line()
        prefix = f"{self.t.render()}. "
        return line[len(prefix):] if line.startswith(prefix) else line

    def observation(self) -> str:
        """Everything after the action line, on one line."""
        return " ".join(self.lines[1:])


@dataclass(frozen=True)
class EventSummary:
    captions: tuple[Caption, ...] = ()
    key_frames: tuple[KeyFrame, ...] = ()

    def __post_init__(self):
        ts = [c.t for c in self.captions]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("event summary timestamps must strictly increase")

    def before(self, t: Timestamp) -> tuple[Caption, ...]:
        return tuple(c for c in self.captions if c.t < t)

    def at(self, t: Timestamp) -> Caption | None:
        for c in self.captions:
            if c.t == t:
                return c
        return None


@dataclass(frozen=True)
class SubgoalEntry:
    index: int
    subgoal_text: str
    t: Timestamp
    caption: Caption
    graph: SceneGraph


@dataclass(frozen=True)
class SubgoalSummary:
    entries: tuple[SubgoalEntry, ...] = ()


def capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def action_text(robot: RobotState, task: TaskSpec) -> str:
    if robot.action_text is not None:
        return robot.action_text
    if 0 <= robot.current_action_index < len(task.plan):
        return capitalize(task.plan[robot.current_action_index].subgoal_text)
    return ""


def audio_labels_at(t: Timestamp, audio: AudioSummary) -> tuple[str, ...]:
    labels: list[str] = []
    for start, end, label in audio:
        if start <= t <= end and label not in labels:
            labels.append(label)
    return tuple(labels)


def relation_sentences(graph: SceneGraph, visible_only: bool) -> list[str]:
    rows = []
    for e in graph.edges:
        if e.object == ROBOT:
            continue
        subj, obj = graph.node(e.subject), graph.node(e.object)
        if visible_only and not subj.visible_now:
            continue
        rows.append((subj.label, RELATION_PHRASES[e.name], obj.label))
    return [f"{s} {p} {o}." for s, p, o in sorted(rows)]


def gripper_sentence(graph: SceneGraph) -> str:
    held = graph.held_object()
    if held is None:
        return "nothing is inside robot gripper."
    node = graph.node(held)
    return f"{node.name or node.object_id} is inside robot gripper."


def render_caption(kf: KeyFrame) -> Caption:
    g = kf.graph
    visible = [n.label for n in g.object_nodes if n.visible_now]
    lines = [f"{kf.t.render()}. Action: {kf.action_text}."]
    lines.append("Visual observation: " + ", ".join(visible) + "." if visible else "Visual observation:")
    lines.extend(relation_sentences(g, visible_only=True))
    lines.append(gripper_sentence(g))
    if kf.audio_labels:
        lines.append("Auditory observation: " + ", ".join(kf.audio_labels) + ".")
    return Caption(kf.t, "\n".join(lines))


def render_state(graph: SceneGraph) -> str:
    """One-line description of a (final-state) graph, all nodes listed."""
    parts = []
    nodes = [n.label for n in graph.object_nodes]
    if nodes:
        parts.append(", ".join(nodes) + ".")
    parts.extend(relation_sentences(graph, visible_only=False))
    parts.append(gripper_sentence(graph))
    return " ".join(parts)


def select_key_frames(
    graphs: Sequence[SceneGraph],
    robots: Sequence[RobotState],
    audio: AudioSummary,
    task: TaskSpec,
) -> list[KeyFrame]:
    boundaries = {s for s, _, _ in audio} | {e for _, e, _ in audio}
    out = []
    for i, (g, r) in enumerate(zip(graphs, robots)):
        reasons = set()
        if i == 0 or not graph_equal(g, graphs[i - 1]):
            reasons.add(GRAPH_CHANGED)
        if r.action_phase == "ended":
            prev = robots[i - 1] if i else None
            if prev is None or prev.action_phase != "ended" or prev.current_action_index != r.current_action_index:
                reasons.add(ACTION_ENDED)
        if g.t in boundaries:
            reasons.add(AUDIO_BOUNDARY)
        if reasons:
            out.append(KeyFrame(g.t, frozenset(reasons), g, action_text(r, task), audio_labels_at(g.t, audio)))
    return out


@dataclass
class Summaries:
    """Everything the reasoning stage consumes for one log."""

    log: SensoryLog
    graphs: list[SceneGraph]
    audio: AudioSummary
    events: EventSummary
    subgoals: SubgoalSummary
    final_graph: SceneGraph
    clouds: list[SemanticPointCloud] = field(default_factory=list, repr=False)

    def captions_by_time(self) -> dict[Timestamp, Caption]:
        return {c.t: c for c in self.events.captions}


def build_event_summary(slog: SensoryLog, graphs: Sequence[SceneGraph], audio: AudioSummary) -> EventSummary:
    kfs = select_key_frames(graphs, [f.robot for f in slog.frames], audio, slog.task)
    return EventSummary(tuple(render_caption(k) for k in kfs), tuple(kfs))


def build_subgoal_summary(
    slog: SensoryLog,
    graphs: Sequence[SceneGraph],
    audio: AudioSummary = (),
) -> SubgoalSummary:
    last_frame: dict[int, int] = {}
    prev_idx = None
    for i, f in enumerate(slog.frames):
        idx = f.robot.current_action_index
        if prev_idx is not None and idx < prev_idx:
            raise PlanIndexRegression(f"plan index went from {prev_idx} to {idx} at {f.t}")
        prev_idx = idx
        if 0 <= idx < len(slog.task.plan):
            last_frame[idx] = i
    entries = []
    for idx in sorted(last_frame):
        i = last_frame[idx]
        f, g = slog.frames[i], graphs[i]
        kf = KeyFrame(f.t, frozenset({ACTION_ENDED}), g, action_text(f.robot, slog.task), audio_labels_at(f.t, audio))
        entries.append(SubgoalEntry(idx, slog.task.plan[idx].subgoal_text, f.t, render_caption(kf), g))
    return SubgoalSummary(tuple(entries))


def summarize(
    slog: SensoryLog,
    cfg: Config = Config(),
    provider: EmbeddingProvider | None = None,
) -> Summaries:
    """Run the sensory, event and subgoal levels over a whole log."""
    camera = slog.camera or next(
        (f.depth_view.camera for f in slog.frames if f.depth_view is not None and f.depth_view.camera is not None),
        None,
    )
    if camera is None and slog.frames:
        raise MissingIntrinsics("log has no camera; relations need camera axes")
    builder = GraphBuilder(slog.task, slog.objects, camera, cfg.relations)

    labels = None
    if any(e.embedding is not None for e in slog.audio_events):
        if provider is None:
            raise ValueError("log has embedded audio events but no embedding provider was given")
        labels = LabelSet.from_provider(slog.task.audio_label_set, provider)
    audio = summarize_audio(slog.audio_events, labels, provider)

    graphs, clouds = [], []
    known: dict[str, str] = {}
    last = None
    for frame, curr, acc in aggregate(slog, cfg.aggregation):
        cam = slog.camera_for(frame) or camera
        relevant = builder.relevant_objects(acc, cam)
        graphs.append(builder.build(acc, frame, relevant, known, observed=curr.objects.keys(), camera=cam))
        known.update(frame.object_states)
        clouds.append(acc)
        last = (frame, acc, relevant, cam)

    if last is None:
        final = SceneGraph((ROBOT_NODE,), frozenset(), Timestamp(0))
    else:
        frame, acc, relevant, cam = last
        final = strip_local(builder.build(acc, frame, relevant, known, observed=(), camera=cam))

    return Summaries(
        log=slog,
        graphs=graphs,
        audio=audio,
        events=build_event_summary(slog, graphs, audio),
        subgoals=build_subgoal_summary(slog, graphs, audio),
        final_graph=final,
        clouds=clouds,
    )

