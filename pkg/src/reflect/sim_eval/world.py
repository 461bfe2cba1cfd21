"""Symbolic kitchen world with coarse box geometry.

Each object is an axis-aligned box (``basin`` boxes have no top face) whose
pose follows from a placement: a floor position, inside or on top of
another object, or held by the robot. Actions change placements and state
attributes; geometry is only used to emit point clouds for logs.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..log_model import GoalPredicate, format_action

GRIPPER_POSE = (0.0, -1.2, 1.8)
POINT_SPACING = 0.04
WALL = 0.01  # gap between a contained object and its container's floor


class IllegalTransition(ValueError):
    pass


@dataclass
class WorldObject:
    object_id: str
    class_name: str
    name: str
    size: tuple[float, float, float]
    kind: str = "box"  # "box" or "basin" (open top)
    attrs: list[str] = field(default_factory=list)
    pickable: bool = False
    container: int = 0  # capacity for put_in
    receptacle: int = 0  # capacity for put_on
    openable: bool = False
    toggleable: bool = False
    crackable: bool = False
    sliceable: bool = False
    stuck: int = 0  # open attempts that fail before the door gives
    present: bool = True  # False: declared in the task but absent from the scene

    @property
    def state_text(self) -> str:
        return " and ".join(self.attrs)


@dataclass(frozen=True)
class Placement:
    kind: str  # "at", "in", "on", "held"
    parent: str | None = None
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)  # "at": absolute bottom centre


def box_surface(size, kind: str = "box", spacing: float = POINT_SPACING) -> np.ndarray:
    """Grid samples over the faces of a box whose bottom centre is the origin."""
    return _box_surface(tuple(float(s) for s in size), kind, spacing).copy()


@lru_cache(maxsize=256)
def _box_surface(size, kind, spacing) -> np.ndarray:
    sx, sy, sz = size
    n = [max(2, math.ceil(s / spacing) + 1) for s in size]
    xs = np.linspace(-sx / 2, sx / 2, n[0])
    ys = np.linspace(-sy / 2, sy / 2, n[1])
    zs = np.linspace(0.0, sz, n[2])
    faces = []

    def grid(a, b):
        return np.stack(np.meshgrid(a, b, indexing="ij"), -1).reshape(-1, 2)

    for z in (0.0, sz) if kind == "box" else (0.0,):
        g = grid(xs, ys)
        faces.append(np.column_stack([g, np.full(len(g), z)]))
    for x in (-sx / 2, sx / 2):
        g = grid(ys, zs)
        faces.append(np.column_stack([np.full(len(g), x), g]))
    for y in (-sy / 2, sy / 2):
        g = grid(xs, zs)
        faces.append(np.column_stack([g[:, 0], np.full(len(g), y), g[:, 1]]))
    return np.unique(np.round(np.concatenate(faces), 6), axis=0)


class World:
    def __init__(self, objects: list[WorldObject], placements: dict[str, Placement]):
        self.objects = {o.object_id: o for o in objects}
        self.placements = dict(placements)
        self.held: str | None = None
        for oid, p in self.placements.items():
            if p.kind == "held":
                self.held = oid

    def copy(self) -> "World":
        return copy.deepcopy(self)

    # -- queries ------------------------------------------------------------

    def present(self) -> list[str]:
        return [oid for oid, o in self.objects.items() if o.present and oid in self.placements]

    def has(self, oid: str, attr: str) -> bool:
        return attr in self.objects[oid].attrs

    def children(self, parent: str, kind: str) -> list[str]:
        return [oid for oid, p in self.placements.items() if p.parent == parent and p.kind == kind]

    def position(self, oid: str) -> np.ndarray:
        p = self.placements[oid]
        if p.kind == "at":
            return np.array(p.offset, dtype=float)
        if p.kind == "held":
            return np.array(GRIPPER_POSE, dtype=float)
        base = self.position(p.parent)
        parent = self.objects[p.parent]
        lift = WALL if p.kind == "in" else parent.size[2] + 0.005
        return base + np.array([p.offset[0], p.offset[1], lift + p.offset[2]])

    def points(self, oid: str) -> np.ndarray:
        o = self.objects[oid]
        return box_surface(o.size, o.kind) + self.position(oid)

    def state(self, oid: str) -> str:
        return self.objects[oid].state_text

    def holds(self, pred: GoalPredicate) -> bool:
        if pred.kind == "object_state":
            o = self.objects.get(pred.subject)
            if o is None or not o.present:
                return False
            want = [p.strip() for p in pred.value.split(" and ") if p.strip()]
            return all(w in o.attrs for w in want)
        if pred.kind == "relation":
            p = self.placements.get(pred.subject)
            kind = {"inside": "in", "on_top_of": "on"}.get(pred.value)
            return p is not None and kind is not None and p.kind == kind and p.parent == pred.object
        if pred.kind == "holding":
            return self.held == pred.subject
        if pred.kind == "not_holding":
            return self.held != pred.subject
        raise ValueError(f"unknown predicate kind {pred.kind!r}")

    # -- state edits ----------------------------------------------------------

    def swap_attr(self, oid: str, old: str | None, new: str) -> None:
        attrs = self.objects[oid].attrs
        if old is not None and old in attrs:
            attrs[attrs.index(old)] = new
        elif new not in attrs:
            attrs.append(new)

    def fill(self, oid: str, liquid: str) -> None:
        attrs = self.objects[oid].attrs
        old = next((a for a in attrs if a == "empty" or a.startswith("filled with")), None)
        self.swap_attr(oid, old, f"filled with {liquid}")

    def empty(self, oid: str) -> None:
        attrs = self.objects[oid].attrs
        old = next((a for a in attrs if a.startswith("filled with")), None)
        if old is not None:
            self.swap_attr(oid, old, "empty")

    def move(self, oid: str, placement: Placement) -> None:
        if self.held == oid:
            self.held = None
        if placement.kind == "held":
            self.held = oid
        self.placements[oid] = placement

    # -- actions --------------------------------------------------------------

    def _obj(self, oid: str) -> WorldObject:
        o = self.objects.get(oid)
        if o is None or not o.present or oid not in self.placements:
            raise IllegalTransition(f"{oid} is not in the scene")
        return o

    def _closed_ancestor(self, oid: str) -> str | None:
        p = self.placements[oid]
        while p.kind in ("in", "on"):
            if p.kind == "in" and self.has(p.parent, "closed"):
                return p.parent
            p = self.placements[p.parent]
        return None

    def apply_action(self, verb: str, args: tuple[str, ...], slot: tuple[float, float, float] | None = None) -> None:
        """Apply one action, or raise IllegalTransition.

        A refused action leaves the world unchanged, except that a stuck door
        uses up one of its failing attempts.
        """
        handler = getattr(self, f"_do_{verb}", None)
        if handler is None:
            raise IllegalTransition(f"unknown verb {verb!r}")
        try:
            if verb in ("put_in", "put_on"):
                handler(*args, slot=slot)
            else:
                handler(*args)
        except TypeError:
            raise IllegalTransition(f"wrong arguments for {verb}: {args}") from None

    def _do_move_to(self, target: str) -> None:
        self._obj(target)

    def _do_pick_up(self, x: str) -> None:
        o = self._obj(x)
        if not o.pickable:
            raise IllegalTransition(f"{x} cannot be picked up")
        if self.held is not None:
            raise IllegalTransition(f"gripper already holds {self.held}")
        closed = self._closed_ancestor(x)
        if closed is not None:
            raise IllegalTransition(f"{x} is inside closed {closed}")
        self.move(x, Placement("held"))

    def _put(self, x: str, y: str, kind: str, slot) -> None:
        self._obj(x)
        target = self._obj(y)
        if self.held != x:
            raise IllegalTransition(f"robot is not holding {x}")
        cap = target.container if kind == "in" else target.receptacle
        if cap <= 0:
            raise IllegalTransition(f"cannot put anything {'in' if kind == 'in' else 'on'} {y}")
        if kind == "in" and self.has(y, "closed"):
            raise IllegalTransition(f"{y} is closed")
        if len(self.children(y, kind)) >= cap:
            raise IllegalTransition(f"{y} is occupied")
        self.move(x, Placement(kind, y, tuple(slot) if slot is not None else (0.0, 0.0, 0.0)))
        self._side_effects()

    def _do_put_in(self, x: str, y: str, slot=None) -> None:
        self._put(x, y, "in", slot)

    def _do_put_on(self, x: str, y: str, slot=None) -> None:
        self._put(x, y, "on", slot)

    def _do_toggle_on(self, x: str) -> None:
        o = self._obj(x)
        if not o.toggleable:
            raise IllegalTransition(f"{x} cannot be toggled")
        if o.openable and self.has(x, "open"):
            raise IllegalTransition(f"{x} is open")
        self.swap_attr(x, "turned off", "turned on")
        self._side_effects()

    def _do_toggle_off(self, x: str) -> None:
        o = self._obj(x)
        if not o.toggleable:
            raise IllegalTransition(f"{x} cannot be toggled")
        self.swap_attr(x, "turned on", "turned off")

    def _do_open(self, x: str) -> None:
        o = self._obj(x)
        if not o.openable:
            raise IllegalTransition(f"{x} cannot be opened")
        if self.held is not None:
            raise IllegalTransition("opening needs a free gripper")
        if o.stuck > 0:
            o.stuck -= 1
            raise IllegalTransition(f"{x} door is stuck")
        self.swap_attr(x, "closed", "open")
        if o.toggleable and self.has(x, "turned on"):
            self.swap_attr(x, "turned on", "turned off")

    def _do_close(self, x: str) -> None:
        o = self._obj(x)
        if not o.openable:
            raise IllegalTransition(f"{x} cannot be closed")
        if self.held is not None:
            raise IllegalTransition("closing needs a free gripper")
        self.swap_attr(x, "open", "closed")

    def _do_crack(self, x: str) -> None:
        o = self._obj(x)
        if not o.crackable:
            raise IllegalTransition(f"{x} cannot be cracked")
        if self.held != x:
            raise IllegalTransition(f"robot must hold {x} to crack it")
        self.swap_attr(x, None, "cracked")

    def _do_slice(self, x: str) -> None:
        o = self._obj(x)
        if not o.sliceable:
            raise IllegalTransition(f"{x} cannot be sliced")
        self.swap_attr(x, None, "sliced")

    def _do_pour(self, a: str, b: str) -> None:
        self._obj(a)
        self._obj(b)
        if self.held != a:
            raise IllegalTransition(f"robot must hold {a} to pour")
        liquid = next((s[len("filled with "):] for s in self.objects[a].attrs if s.startswith("filled with ")), None)
        if liquid is None:
            raise IllegalTransition(f"{a} is empty")
        self.fill(b, liquid)
        self.empty(a)

    def _side_effects(self) -> None:
        """Running faucets fill containers in the sink; running coffee machines fill mugs."""
        for oid, o in self.objects.items():
            if not o.present or oid not in self.placements or not self.has(oid, "turned on"):
                continue
            if o.class_name == "faucet":
                for sink in (s for s, so in self.objects.items() if so.class_name == "sink" and s in self.placements):
                    for c in self.children(sink, "in"):
                        if self.objects[c].container:
                            self.fill(c, "water")
            elif o.class_name == "coffee machine":
                for c in self.children(oid, "in"):
                    if self.objects[c].container:
                        self.fill(c, "coffee")


def executable_actions(objects: list[WorldObject]) -> tuple[str, ...]:
    """Every action template the world could accept for these objects."""
    out = []
    items = [o for o in objects if o.pickable]
    for o in objects:
        if o.pickable:
            out.append(format_action("pick_up", [o.object_id]))
    for x in items:
        for y in objects:
            if y.container and y is not x:
                out.append(format_action("put_in", [x.object_id, y.object_id]))
            if y.receptacle and y is not x:
                out.append(format_action("put_on", [x.object_id, y.object_id]))
    for o in objects:
        if o.toggleable:
            out.append(format_action("toggle_on", [o.object_id]))
            out.append(format_action("toggle_off", [o.object_id]))
        if o.openable:
            out.append(format_action("open", [o.object_id]))
            out.append(format_action("close", [o.object_id]))
        if o.crackable:
            out.append(format_action("crack", [o.object_id]))
        if o.sliceable:
            out.append(format_action("slice", [o.object_id]))
    return tuple(out)
