"""Task-informed scene graphs built from the accumulated point cloud."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .config import RelationConfig
from .geometry import ObjectInstance, SemanticPointCloud
from .log_model import Camera, Frame, ObjectDecl, TaskSpec, Timestamp
from .relations import LOCAL_RELATIONS, RELATION_NAMES, ROBOT, Relation, relate, robot_relation


@dataclass(frozen=True)
class Node:
    object_id: str
    class_name: str
    state: str | None = None
    visible_now: bool = True
    name: str = ""  # display name used in captions

    @property
    def label(self) -> str:
        """Caption form: ``pot (empty and clean)`` or bare ``sink``."""
        name = self.name or self.object_id
        return f"{name} ({self.state})" if self.state else name


ROBOT_NODE = Node(ROBOT, ROBOT, None, True, ROBOT)

Edge = Relation


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[Node, ...]  # object nodes in first-appearance order, robot node last
    edges: frozenset[Relation]
    t: Timestamp

    def __post_init__(self):
        ids = [n.object_id for n in self.nodes]
        if ids.count(ROBOT) != 1:
            raise ValueError("scene graph needs exactly one robot node")
        known = set(ids)
        for e in self.edges:
            if e.subject not in known or e.object not in known:
                raise ValueError(f"edge {e} references a missing node")

    @property
    def object_nodes(self) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.object_id != ROBOT)

    def node(self, object_id: str) -> Node | None:
        for n in self.nodes:
            if n.object_id == object_id:
                return n
        return None

    def held_object(self) -> str | None:
        for e in self.edges:
            if e.name == "inside_robot_gripper":
                return e.subject
        return None

    def has_edge(self, subject: str, name: str, obj: str) -> bool:
        return Relation(subject, name, obj) in self.edges

    def canonical(self) -> tuple[frozenset, frozenset]:
        return (
            frozenset((n.object_id, n.state) for n in self.nodes),
            frozenset((e.subject, e.name, e.object) for e in self.edges),
        )

    def to_text(self) -> str:
        """Line-oriented canonical serialization (nodes by id, edges sorted)."""
        lines = [f"t {self.t.render()}"]
        for n in sorted(self.nodes, key=lambda n: n.object_id):
            vis = "visible" if n.visible_now else "hidden"
            lines.append(f"node {n.object_id} {vis} {n.class_name!r} {n.state or ''!r}")
        for e in sorted(self.edges):
            lines.append(f"edge {e.subject} {e.name} {e.object}")
        return "\n".join(lines) + "\n"


def graph_equal(g1: SceneGraph, g2: SceneGraph) -> bool:
    return g1.canonical() == g2.canonical()


class GraphBuilder:
    """Builds graphs for one log, caching pairwise relations across frames.

    A relation depends only on the two point sets and the camera, so
    unchanged objects are not re-evaluated frame after frame.
    """

    def __init__(
        self,
        task: TaskSpec,
        objects: Mapping[str, ObjectDecl],
        camera: Camera,
        cfg: RelationConfig = RelationConfig(),
    ):
        self.task = task
        self.objects = objects
        self.camera = camera
        self.cfg = cfg
        self._order = {oid: i for i, oid in enumerate(objects)}
        self._cache: dict[tuple, Relation | None] = {}
        self.seeds = seed_objects(task, objects)

    def relation(self, a: ObjectInstance, b: ObjectInstance, camera: Camera | None = None) -> Relation | None:
        cam = camera or self.camera
        key = (a.object_id, a.fingerprint, b.object_id, b.fingerprint, cam.key())
        if key not in self._cache:
            self._cache[key] = relate(a, b, cam, self.cfg)
        return self._cache[key]

    def relevant_objects(self, cloud: SemanticPointCloud, camera: Camera | None = None) -> set[str]:
        relevant = set(self.seeds)
        present_seeds = [cloud.objects[s] for s in self.seeds if s in cloud.objects]
        for oid, obj in cloud.objects.items():
            if oid in self.seeds:
                continue
            for s in present_seeds:
                if self.relation(obj, s, camera) is not None or self.relation(s, obj, camera) is not None:
                    relevant.add(oid)
                    break
        return relevant

    def build(
        self,
        cloud: SemanticPointCloud,
        frame: Frame,
        relevant: Iterable[str],
        known_states: Mapping[str, str] | None = None,
        observed: Iterable[str] | None = None,
        camera: Camera | None = None,
    ) -> SceneGraph:
        states = dict(known_states or {})
        states.update(frame.object_states)
        seen = set(observed) if observed is not None else _observed_ids(frame, self.objects)
        members = [oid for oid in relevant if oid in cloud.objects]
        held = frame.robot.held_object
        if held is not None and held not in members and held in self.objects:
            members.append(held)
        members.sort(key=self._sort_key(cloud))

        nodes = []
        for oid in members:
            decl = self.objects.get(oid)
            inst = cloud.objects.get(oid)
            cls = inst.class_name if inst is not None else decl.class_name
            nodes.append(Node(oid, cls, states.get(oid) or None, oid in seen, decl.name if decl else oid))
        nodes.append(ROBOT_NODE)

        edges = set()
        present = [cloud.objects[oid] for oid in members if oid in cloud.objects]
        for a in present:
            for b in present:
                if a is b:
                    continue
                rel = self.relation(a, b, camera)
                if rel is not None:
                    edges.add(rel)
        rr = robot_relation(frame.robot)
        if rr is not None:
            edges.add(rr)
        return SceneGraph(tuple(nodes), frozenset(edges), frame.t)

    def _sort_key(self, cloud: SemanticPointCloud):
        def key(oid: str):
            inst = cloud.objects.get(oid)
            first = inst.first_seen.seconds if inst is not None else 1 << 30
            return (first, self._order.get(oid, len(self._order)), oid)

        return key


def seed_objects(task: TaskSpec, objects: Mapping[str, ObjectDecl]) -> set[str]:
    """Objects named by the plan or goal, widened to every object of a named class.

    Plans refer to object classes as much as instances ("put pot on stove
    burner"), so all instances of a mentioned class count as mentioned.
    """
    ids = {a for step in task.plan for a in step.arguments}
    for p in task.goal_predicates:
        ids.add(p.subject)
        if p.object is not None:
            ids.add(p.object)
    classes = {objects[i].class_name for i in ids if i in objects}
    ids.update(oid for oid, d in objects.items() if d.class_name in classes)
    ids.discard(ROBOT)
    return ids


def _observed_ids(frame: Frame, objects: Mapping[str, ObjectDecl]) -> set[str]:
    if frame.labeled_points is not None:
        return {oid for oid, pts in frame.labeled_points.items() if len(pts)}
    dv = frame.depth_view
    labels = set(dv.segmentation[(dv.depth > 0) & (dv.segmentation != 0)].tolist())
    return {d.object_id for d in objects.values() if d.label in labels}


def relevant_objects(
    spec: TaskSpec,
    cloud: SemanticPointCloud,
    cfg: RelationConfig = RelationConfig(),
    *,
    objects: Mapping[str, ObjectDecl],
    camera: Camera,
) -> set[str]:
    return GraphBuilder(spec, objects, camera, cfg).relevant_objects(cloud)


def build_graph(
    cloud: SemanticPointCloud,
    frame: Frame,
    relevant: Iterable[str],
    cfg: RelationConfig = RelationConfig(),
    *,
    spec: TaskSpec,
    objects: Mapping[str, ObjectDecl],
    camera: Camera,
    known_states: Mapping[str, str] | None = None,
) -> SceneGraph:
    return GraphBuilder(spec, objects, camera, cfg).build(cloud, frame, relevant, known_states)


def strip_local(graph: SceneGraph) -> SceneGraph:
    return replace(graph, edges=frozenset(e for e in graph.edges if e.name not in LOCAL_RELATIONS))


def final_state_graph(
    cloud: SemanticPointCloud,
    last_frame: Frame,
    relevant: Iterable[str],
    cfg: RelationConfig = RelationConfig(),
    *,
    spec: TaskSpec,
    objects: Mapping[str, ObjectDecl],
    camera: Camera,
    known_states: Mapping[str, str] | None = None,
) -> SceneGraph:
    g = build_graph(cloud, last_frame, relevant, cfg, spec=spec, objects=objects, camera=camera, known_states=known_states)
    return strip_local(g)


def parse_graph_text(text: str) -> SceneGraph:
    """Inverse of :meth:`SceneGraph.to_text` (display names are not serialized)."""
    import ast

    t = Timestamp(0)
    nodes, edges = [], set()
    for line in text.splitlines():
        if not line.strip():
            continue
        kind, _, rest = line.partition(" ")
        if kind == "t":
            t = Timestamp.parse(rest)
        elif kind == "node":
            oid, vis, rest = rest.split(" ", 2)
            cls_repr, state_repr = _split_reprs(rest)
            cls, state = ast.literal_eval(cls_repr), ast.literal_eval(state_repr)
            nodes.append(Node(oid, cls, state or None, vis == "visible", ROBOT if oid == ROBOT else ""))
        elif kind == "edge":
            s, name, o = rest.split(" ")
            if name not in RELATION_NAMES:
                raise ValueError(f"unknown relation {name!r}")
            edges.add(Relation(s, name, o))
        else:
            raise ValueError(f"bad graph line {line!r}")
    robot = [n for n in nodes if n.object_id == ROBOT]
    others = [n for n in nodes if n.object_id != ROBOT]
    return SceneGraph(tuple(others + robot), frozenset(edges), t)


def _split_reprs(text: str) -> tuple[str, str]:
    # two adjacent Python string literals separated by one space
    quote = text[0]
    i = 1
    while True:
        if text[i] == "\\":
            i += 2
            continue
        if text[i] == quote:
            break
        i += 1
    return text[: i + 1], text[i + 2 :]
