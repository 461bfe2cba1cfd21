"""Robot execution logs: in-memory model plus the on-disk bundle format.

A log bundle is a directory::

    manifest.json        task spec, object declarations, camera, frame index
    frames/<n>.json      per-frame metadata and inline labeled points, or
                         references to depth/<n>.bin and seg/<n>.bin
    audio/events.json    timed audio events (label or embedding payload)

Binary payloads are row-major little-endian: float32 meters for depth,
int32 segmentation labels for seg.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

FORMAT_VERSION = "reflect-log/1"

VERBS = (
    "pick_up",
    "put_in",
    "put_on",
    "toggle_on",
    "toggle_off",
    "open",
    "close",
    "slice",
    "crack",
    "pour",
    "move_to",
)

PREDICATE_KINDS = ("object_state", "relation", "holding", "not_holding")

# Relation names a goal predicate may reference (mirrors relations.RELATION_NAMES;
# duplicated here so the data model has no geometry dependency).
GOAL_RELATIONS = (
    "inside",
    "on_top_of",
    "above",
    "below",
    "left_of",
    "right_of",
    "occluding",
    "near",
    "inside_robot_gripper",
)

ACTION_PHASES = ("executing", "ended")


class LogError(ValueError):
    """Base class for problems with a log bundle."""


class MissingManifest(LogError):
    pass


class SchemaViolation(LogError):
    def __init__(self, frame_index: int | None, field_name: str, detail: str = ""):
        self.frame_index = frame_index
        self.field_name = field_name
        where = "manifest" if frame_index is None else f"frame {frame_index}"
        msg = f"{where}: invalid field {field_name!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnsortedFrames(LogError):
    pass


_TS_RE = re.compile(r"^(\d{2,}):([0-5]\d)$")


@dataclass(frozen=True, order=True)
class Timestamp:
    """Whole seconds since task start, rendered as ``MM:SS``."""

    seconds: int

    def __post_init__(self):
        if isinstance(self.seconds, bool) or not isinstance(self.seconds, (int, np.integer)):
            raise TypeError(f"Timestamp seconds must be an int, got {self.seconds!r}")
        if self.seconds < 0:
            raise ValueError(f"Timestamp must be non-negative, got {self.seconds}")
        object.__setattr__(self, "seconds", int(self.seconds))

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        m = _TS_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a MM:SS timestamp: {text!r}")
        return cls(int(m.group(1)) * 60 + int(m.group(2)))

    @classmethod
    def from_seconds(cls, value: float) -> "Timestamp":
        """Sub-second values are floored."""
        return cls(int(math.floor(value)))

    def render(self) -> str:
        minutes, secs = divmod(self.seconds, 60)
        return f"{minutes:02d}:{secs:02d}"

    def __str__(self) -> str:
        return self.render()


def _ts(value: Any) -> Timestamp:
    if isinstance(value, Timestamp):
        return value
    if isinstance(value, str):
        return Timestamp.parse(value)
    return Timestamp(value)


@dataclass(frozen=True)
class GoalPredicate:
    kind: str
    subject: str
    object: str | None = None
    value: str = ""


@dataclass(frozen=True)
class PlannedAction:
    subgoal_text: str
    action_verb: str
    arguments: tuple[str, ...]
    planned_end: Timestamp | None = None

    def template(self) -> str:
        """Executable-action form, e.g. ``put_on (pot-1, stoveburner-4)``."""
        return format_action(self.action_verb, self.arguments)


@dataclass(frozen=True)
class TaskSpec:
    task_name: str
    goal_text: str
    goal_predicates: tuple[GoalPredicate, ...]
    plan: tuple[PlannedAction, ...]
    executable_actions: tuple[str, ...]
    audio_label_set: tuple[str, ...] = ()


@dataclass(frozen=True)
class ObjectDecl:
    object_id: str
    class_name: str
    name: str
    label: int  # segmentation id; 0 is reserved for background


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    pose: np.ndarray  # 4x4 world-from-camera, OpenCV axes (x right, y down, z forward)

    def __post_init__(self):
        pose = np.asarray(self.pose, dtype=float)
        if pose.shape != (4, 4):
            raise ValueError(f"camera pose must be 4x4, got {pose.shape}")
        object.__setattr__(self, "pose", pose)

    def __eq__(self, other):
        if not isinstance(other, Camera):
            return NotImplemented
        return (
            (self.fx, self.fy, self.cx, self.cy) == (other.fx, other.fy, other.cx, other.cy)
            and np.array_equal(self.pose, other.pose)
        )

    __hash__ = None

    def key(self) -> tuple:
        return (self.fx, self.fy, self.cx, self.cy, self.pose.tobytes())

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points (N,3) -> camera-frame points (N,3)."""
        rot = self.pose[:3, :3]
        return (np.asarray(points, dtype=float) - self.pose[:3, 3]) @ rot

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return pixel coordinates (N,2) and depths (N,) of world points."""
        cam = self.to_camera(points)
        z = cam[:, 2]
        safe = np.where(np.abs(z) < 1e-12, 1e-12, z)
        uv = np.stack([self.fx * cam[:, 0] / safe + self.cx, self.fy * cam[:, 1] / safe + self.cy], axis=1)
        return uv, z


@dataclass(frozen=True)
class RobotState:
    gripper_open: bool
    held_object: str | None
    current_action_index: int
    action_phase: str
    # Free-text action shown in captions while navigating between subgoals
    # ("Move to sink"); None means the current plan step's subgoal text.
    action_text: str | None = None

    def __post_init__(self):
        if self.held_object is not None and self.gripper_open:
            raise ValueError("held_object present requires gripper_open == False")
        if self.action_phase not in ACTION_PHASES:
            raise ValueError(f"unknown action phase {self.action_phase!r}")


@dataclass(frozen=True)
class AudioEvent:
    start: Timestamp
    end: Timestamp
    label: str | None = None
    embedding: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("audio event start must not exceed end")
        if (self.label is None) == (self.embedding is None):
            raise ValueError("audio event needs exactly one of label or embedding")
        if self.embedding is not None:
            norm = float(np.linalg.norm(self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"audio embedding must be unit norm, got {norm:.8f}")

    def active_at(self, t: Timestamp) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True, eq=False)
class DepthView:
    depth: np.ndarray  # H x W float32 meters
    segmentation: np.ndarray  # H x W int32 labels
    camera: Camera | None

    def __eq__(self, other):
        if not isinstance(other, DepthView):
            return NotImplemented
        return (
            np.array_equal(self.depth, other.depth)
            and np.array_equal(self.segmentation, other.segmentation)
            and self.camera == other.camera
        )


@dataclass(frozen=True, eq=False)
class Frame:
    t: Timestamp
    robot: RobotState
    object_states: Mapping[str, str] = field(default_factory=dict)
    labeled_points: Mapping[str, np.ndarray] | None = None
    depth_view: DepthView | None = None
    audio_events: tuple[AudioEvent, ...] = ()

    def __post_init__(self):
        if (self.labeled_points is None) == (self.depth_view is None):
            raise ValueError("frame needs exactly one visual payload")

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        if (self.t, self.robot, dict(self.object_states), self.audio_events) != (
            other.t,
            other.robot,
            dict(other.object_states),
            other.audio_events,
        ):
            return False
        if self.depth_view is not None or other.depth_view is not None:
            return self.depth_view == other.depth_view
        a, b = self.labeled_points, other.labeled_points
        return list(a) == list(b) and all(np.array_equal(a[k], b[k]) for k in a)


@dataclass(frozen=True, eq=False)
class SensoryLog:
    task: TaskSpec
    objects: Mapping[str, ObjectDecl]
    frames: tuple[Frame, ...]
    audio_events: tuple[AudioEvent, ...] = ()
    camera: Camera | None = None

    def __eq__(self, other):
        if not isinstance(other, SensoryLog):
            return NotImplemented
        return (
            self.task == other.task
            and list(self.objects.values()) == list(other.objects.values())
            and self.frames == other.frames
            and self.audio_events == other.audio_events
            and self.camera == other.camera
        )

    def display_name(self, object_id: str) -> str:
        decl = self.objects.get(object_id)
        return decl.name if decl else display_name(object_id, self.objects)

    def camera_for(self, frame: Frame) -> Camera | None:
        if frame.depth_view is not None and frame.depth_view.camera is not None:
            return frame.depth_view.camera
        return self.camera


def display_name(object_id: str, objects: Mapping[str, ObjectDecl] | Iterable[str] = ()) -> str:
    """Strip a trailing ``-<n>`` suffix when no other declared id shares the stem."""
    stem, sep, suffix = object_id.rpartition("-")
    if not sep or not suffix.isdigit():
        return object_id
    siblings = [oid for oid in objects if oid != object_id and oid.rpartition("-")[0] == stem]
    return object_id if siblings else stem


_ACTION_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


def format_action(verb: str, arguments: Iterable[str]) -> str:
    return f"{verb} ({', '.join(arguments)})"


def parse_action(template: str) -> tuple[str, tuple[str, ...]]:
    """``"put_on (pot-1, stoveburner-4)"`` -> ``("put_on", ("pot-1", "stoveburner-4"))``."""
    m = _ACTION_RE.match(template)
    if not m:
        raise ValueError(f"not an action template: {template!r}")
    args = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
    return m.group(1), args


def validate_task(spec: TaskSpec) -> list[str]:
    """Return human-readable warnings; an empty list means the spec is clean."""
    warnings: list[str] = []
    if not spec.plan:
        warnings.append("plan is empty")
    if not spec.executable_actions:
        warnings.append("no executable actions declared")
    mentioned: set[str] = set()
    for i, step in enumerate(spec.plan):
        if step.action_verb not in VERBS:
            warnings.append(f"plan step {i}: unknown verb {step.action_verb!r}")
        mentioned.update(step.arguments)
    for pred in spec.goal_predicates:
        if pred.kind not in PREDICATE_KINDS:
            warnings.append(f"goal predicate: unknown kind {pred.kind!r}")
        if pred.kind == "relation" and pred.value not in GOAL_RELATIONS:
            warnings.append(f"goal predicate: unknown relation {pred.value!r}")
        for oid in (pred.subject, pred.object):
            if oid is not None and oid not in mentioned:
                warnings.append(f"goal predicate references {oid!r}, which no plan step mentions")
    for template in spec.executable_actions:
        try:
            verb, _ = parse_action(template)
        except ValueError:
            warnings.append(f"malformed executable action {template!r}")
            continue
        if verb not in VERBS:
            warnings.append(f"executable action {template!r}: unknown verb {verb!r}")
    return warnings


# ---------------------------------------------------------------------------
# JSON (de)serialization


def camera_to_json(cam: Camera) -> dict:
    return {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy, "pose": cam.pose.tolist()}


def camera_from_json(data: Mapping) -> Camera:
    try:
        return Camera(float(data["fx"]), float(data["fy"]), float(data["cx"]), float(data["cy"]), np.array(data["pose"], dtype=float))
    except KeyError as exc:
        raise ValueError(f"camera missing {exc.args[0]!r}") from None


def task_to_json(task: TaskSpec) -> dict:
    return {
        "name": task.task_name,
        "goal": {
            "text": task.goal_text,
            "predicates": [
                {k: v for k, v in (("kind", p.kind), ("subject", p.subject), ("object", p.object), ("value", p.value)) if v is not None}
                for p in task.goal_predicates
            ],
        },
        "plan": [
            {
                "subgoal": s.subgoal_text,
                "verb": s.action_verb,
                "args": list(s.arguments),
                **({"end": s.planned_end.render()} if s.planned_end is not None else {}),
            }
            for s in task.plan
        ],
        "executable_actions": list(task.executable_actions),
        "audio_labels": list(task.audio_label_set),
    }


def task_from_json(data: Mapping) -> TaskSpec:
    goal = data.get("goal", {})
    preds = tuple(
        GoalPredicate(p["kind"], p["subject"], p.get("object"), p.get("value", "")) for p in goal.get("predicates", [])
    )
    plan = tuple(
        PlannedAction(
            s["subgoal"], s["verb"], tuple(s.get("args", ())), _ts(s["end"]) if s.get("end") is not None else None
        )
        for s in data["plan"]
    )
    return TaskSpec(
        task_name=data["name"],
        goal_text=goal.get("text", ""),
        goal_predicates=preds,
        plan=plan,
        executable_actions=tuple(data.get("executable_actions", ())),
        audio_label_set=tuple(data.get("audio_labels", ())),
    )


def _audio_to_json(ev: AudioEvent) -> dict:
    out: dict[str, Any] = {"start": ev.start.render(), "end": ev.end.render()}
    if ev.label is not None:
        out["label"] = ev.label
    else:
        out["embedding"] = list(ev.embedding)
    return out


def _audio_from_json(data: Mapping) -> AudioEvent:
    emb = data.get("embedding")
    return AudioEvent(_ts(data["start"]), _ts(data["end"]), data.get("label"), tuple(float(x) for x in emb) if emb is not None else None)


def _robot_to_json(r: RobotState) -> dict:
    out = {
        "gripper_open": r.gripper_open,
        "held_object": r.held_object,
        "action_index": r.current_action_index,
        "phase": r.action_phase,
    }
    if r.action_text is not None:
        out["action_text"] = r.action_text
    return out


def save_log(slog: SensoryLog, path: str | Path) -> Path:
    """Write ``slog`` as a bundle directory; returns the directory path."""
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "audio").mkdir(exist_ok=True)
    index = []
    for n, frame in enumerate(slog.frames):
        rel = f"frames/{n:04d}.json"
        index.append(rel)
        body: dict[str, Any] = {
            "t": frame.t.render(),
            "robot": _robot_to_json(frame.robot),
            "object_states": dict(frame.object_states),
        }
        if frame.labeled_points is not None:
            body["points"] = {oid: np.asarray(pts, dtype=float).tolist() for oid, pts in frame.labeled_points.items()}
        else:
            dv = frame.depth_view
            (root / "depth").mkdir(exist_ok=True)
            (root / "seg").mkdir(exist_ok=True)
            depth = np.ascontiguousarray(dv.depth, dtype="<f4")
            seg = np.ascontiguousarray(dv.segmentation, dtype="<i4")
            (root / f"depth/{n:04d}.bin").write_bytes(depth.tobytes())
            (root / f"seg/{n:04d}.bin").write_bytes(seg.tobytes())
            body["depth"] = {
                "depth_file": f"depth/{n:04d}.bin",
                "seg_file": f"seg/{n:04d}.bin",
                "height": int(depth.shape[0]),
                "width": int(depth.shape[1]),
            }
            if dv.camera is not None:
                body["depth"]["camera"] = camera_to_json(dv.camera)
        _write_json(root / rel, body)
    manifest = {
        "format": FORMAT_VERSION,
        "task": task_to_json(slog.task),
        "objects": [
            {"id": d.object_id, "class": d.class_name, "name": d.name, "label": d.label} for d in slog.objects.values()
        ],
        "frames": index,
    }
    if slog.camera is not None:
        manifest["camera"] = camera_to_json(slog.camera)
    _write_json(root / "manifest.json", manifest)
    _write_json(root / "audio/events.json", [_audio_to_json(e) for e in slog.audio_events])
    return root


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path, frame_index: int | None, what: str) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaViolation(frame_index, what, f"missing file {path.name}") from None
    except json.JSONDecodeError as exc:
        raise SchemaViolation(frame_index, what, f"bad JSON: {exc}") from None


def load_log(path: str | Path) -> SensoryLog:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(f"no manifest.json in {root}")
    manifest = _read_json(manifest_path, None, "manifest")

    try:
        task = task_from_json(manifest["task"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(None, "task", str(exc)) from None
    for w in validate_task(task):
        log.warning("task spec: %s", w)

    objects: dict[str, ObjectDecl] = {}
    labels: dict[int, str] = {}
    for entry in manifest.get("objects", []):
        try:
            decl = ObjectDecl(entry["id"], entry["class"], entry.get("name") or "", int(entry["label"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(None, "objects", str(exc)) from None
        if decl.object_id in objects or decl.label in labels or decl.label == 0:
            raise SchemaViolation(None, "objects", f"duplicate or reserved id/label for {decl.object_id!r}")
        objects[decl.object_id] = decl
        labels[decl.label] = decl.object_id
    for oid, decl in list(objects.items()):
        if not decl.name:
            objects[oid] = ObjectDecl(oid, decl.class_name, display_name(oid, objects), decl.label)

    camera = None
    if "camera" in manifest:
        try:
            camera = camera_from_json(manifest["camera"])
        except (TypeError, ValueError) as exc:
            raise SchemaViolation(None, "camera", str(exc)) from None

    try:
        audio_events = tuple(_audio_from_json(e) for e in _read_json(root / "audio/events.json", None, "audio"))
    except SchemaViolation:
        if (root / "audio/events.json").exists():
            raise
        audio_events = ()
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(None, "audio", str(exc)) from None

    frames = []
    for n, rel in enumerate(manifest.get("frames", [])):
        frames.append(_load_frame(root, rel, n, objects, labels, audio_events))
    for n in range(1, len(frames)):
        if frames[n].t <= frames[n - 1].t:
            raise UnsortedFrames(f"frame {n} at {frames[n].t} does not follow {frames[n - 1].t}")
    return SensoryLog(task, objects, tuple(frames), audio_events, camera)


def _load_frame(root, rel, n, objects, labels, audio_events) -> Frame:
    body = _read_json(root / rel, n, "frame")
    try:
        t = _ts(body["t"])
    except (KeyError, ValueError, TypeError):
        raise SchemaViolation(n, "t") from None

    try:
        r = body["robot"]
        robot = RobotState(bool(r["gripper_open"]), r.get("held_object"), int(r["action_index"]), r["phase"], r.get("action_text"))
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaViolation(n, "robot", str(exc)) from None
    if robot.held_object is not None and robot.held_object not in objects:
        raise SchemaViolation(n, "robot.held_object", f"undeclared object {robot.held_object!r}")

    states = body.get("object_states", {})
    for oid in states:
        if oid not in objects:
            raise SchemaViolation(n, "object_states", f"undeclared object {oid!r}")

    labeled = None
    depth_view = None
    if "points" in body:
        labeled = {}
        for oid, pts in body["points"].items():
            if oid not in objects:
                raise SchemaViolation(n, "points", f"undeclared object {oid!r}")
            arr = np.asarray(pts, dtype=float).reshape(-1, 3)
            if not np.all(np.isfinite(arr)):
                raise SchemaViolation(n, "points", f"non-finite coordinates for {oid!r}")
            labeled[oid] = arr
    elif "depth" in body:
        d = body["depth"]
        try:
            h, w = int(d["height"]), int(d["width"])
            depth = np.frombuffer((root / d["depth_file"]).read_bytes(), dtype="<f4").reshape(h, w).astype(np.float32)
            seg = np.frombuffer((root / d["seg_file"]).read_bytes(), dtype="<i4").reshape(h, w).astype(np.int32)
        except (KeyError, ValueError, FileNotFoundError) as exc:
            raise SchemaViolation(n, "depth", str(exc)) from None
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise SchemaViolation(n, "depth", "depth values must be finite and >= 0")
        unknown = set(np.unique(seg).tolist()) - set(labels) - {0}
        if unknown:
            raise SchemaViolation(n, "segmentation", f"undeclared labels {sorted(unknown)}")
        cam = None
        if "camera" in d:
            try:
                cam = camera_from_json(d["camera"])
            except (TypeError, ValueError) as exc:
                raise SchemaViolation(n, "depth.camera", str(exc)) from None
        depth_view = DepthView(depth, seg, cam)
    else:
        raise SchemaViolation(n, "visual", "frame has neither points nor depth")

    active = tuple(e for e in audio_events if e.active_at(t))
    return Frame(t, robot, dict(states), labeled, depth_view, active)


def attach_audio(frames: Iterable[Frame], audio_events: tuple[AudioEvent, ...]) -> tuple[Frame, ...]:
    """Return frames whose ``audio_events`` hold the events active at each frame time."""
    out = []
    for f in frames:
        active = tuple(e for e in audio_events if e.active_at(f.t))
        out.append(Frame(f.t, f.robot, f.object_states, f.labeled_points, f.depth_view, active))
    return tuple(out)
