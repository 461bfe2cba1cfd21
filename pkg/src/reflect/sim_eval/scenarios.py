"""Scripted kitchen scenarios with injected failures and annotations.

Six tasks, each with a nominal or failing script. Object layouts keep
unrelated objects at least 0.4 m apart so the only spatial relations that
appear are the intended ones (contact placements and a few side-by-side
pairs on countertops).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..log_model import GoalPredicate, PlannedAction, TaskSpec, Timestamp
from .world import Placement, WorldObject, executable_actions

FAILURE_CATEGORIES = (
    "drop",
    "missing_object",
    "blocked_precondition",
    "wrong_plan_target",
    "wrong_plan_order",
    "occluded_state",
    "spilled",
    "unmet_goal",
)
EXECUTION_CATEGORIES = frozenset({"drop", "missing_object", "blocked_precondition", "occluded_state", "spilled"})

AUDIO_LABELS = (
    "water runs in sink",
    "something drops",
    "toaster pops",
    "microwave hums",
    "coffee machine brews",
    "door creaks",
)

# Camera 3 m in front of the counters looking along world +Y: image x is
# world +X and image up is world +Z.
CAMERA_POSE = np.array(
    [
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, -3.0],
        [0.0, -1.0, 0.0, 0.8],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
CAMERA_INTRINSICS = (500.0, 500.0, 320.0, 240.0)


@dataclass(frozen=True)
class FailureInjection:
    category: str
    at: Timestamp
    params: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.category not in FAILURE_CATEGORIES:
            raise ValueError(f"unknown failure category {self.category!r}")

    @property
    def failure_type(self) -> str:
        return "execution" if self.category in EXECUTION_CATEGORIES else "planning"


@dataclass(frozen=True)
class Annotation:
    failure_type: str
    category: str
    ranges: tuple[tuple[Timestamp, Timestamp], ...]

    def contains(self, t: Timestamp) -> bool:
        return any(a <= t <= b for a, b in self.ranges)


@dataclass(frozen=True)
class StepSpan:
    """Robot executes plan step ``index`` over [start, end]; its effect lands at ``end``."""

    index: int
    start: int
    end: int
    slot: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class WorldEvent:
    """Scripted change: ``drop`` (held object falls), ``move`` or ``state``."""

    t: int
    kind: str
    target: str | None = None
    placement: Placement | None = None
    attr: tuple[str | None, str] | None = None  # (old, new) for "state"
    spill: bool = False


@dataclass
class Scenario:
    name: str
    task: TaskSpec
    objects: list[WorldObject]
    placements: dict[str, Placement]
    steps: list[StepSpan]
    duration: int
    events: list[WorldEvent] = field(default_factory=list)
    audio: list[tuple[int, int, str]] = field(default_factory=list)
    visibility: Callable[[int], set[str]] | None = None  # None: everything present is visible
    injected_failure: FailureInjection | None = None
    annotation: Annotation | None = None

    def __post_init__(self):
        if (self.injected_failure is None) != (self.annotation is None):
            raise ValueError(f"{self.name}: annotation present iff a failure is injected")

    @property
    def expected_type(self) -> str:
        return self.annotation.failure_type if self.annotation else "none"


# ---------------------------------------------------------------------------
# object catalogue


def _catalogue() -> dict[str, dict]:
    return {
        "pot": dict(size=(0.16, 0.16, 0.12), kind="basin", attrs=["empty", "clean"], pickable=True, container=1),
        "sink": dict(size=(0.5, 0.4, 0.25), kind="basin", container=2),
        "faucet": dict(size=(0.06, 0.06, 0.3), attrs=["turned off"], toggleable=True),
        "stove burner": dict(size=(0.22, 0.22, 0.02), attrs=["turned off"], toggleable=True, receptacle=1),
        "soap bottle": dict(size=(0.06, 0.06, 0.18), pickable=True),
        "potato": dict(size=(0.08, 0.08, 0.08), pickable=True),
        "countertop": dict(size=(0.8, 0.5, 0.04), receptacle=6),
        "bread": dict(size=(0.1, 0.02, 0.1), pickable=True, sliceable=True),
        "toaster": dict(size=(0.25, 0.15, 0.18), kind="basin", attrs=["turned off"], toggleable=True, container=1),
        "egg": dict(size=(0.05, 0.05, 0.06), pickable=True, crackable=True),
        "pan": dict(size=(0.2, 0.2, 0.05), kind="basin", pickable=True, container=1),
        "fridge": dict(size=(0.6, 0.6, 1.2), attrs=["closed"], openable=True, container=3),
        "plate": dict(size=(0.2, 0.2, 0.02), pickable=True, receptacle=1),
        "microwave": dict(size=(0.5, 0.4, 0.3), attrs=["closed", "turned off"], openable=True, toggleable=True, container=1),
        "mug": dict(size=(0.08, 0.08, 0.1), kind="basin", attrs=["empty", "clean"], pickable=True, container=1),
        "cup": dict(size=(0.08, 0.08, 0.1), kind="basin", attrs=["empty", "clean"], pickable=True, container=1),
        "coffee machine": dict(size=(0.3, 0.3, 0.4), attrs=["turned off"], toggleable=True, container=1),
        "bowl": dict(size=(0.14, 0.14, 0.07), kind="basin", pickable=True, container=1),
        "cabinet": dict(size=(0.6, 0.4, 0.5), attrs=["closed"], openable=True, container=3),
    }


def make_object(object_id: str, class_name: str, name: str, **overrides) -> WorldObject:
    spec = copy.deepcopy(_catalogue()[class_name])
    spec.update(overrides)
    return WorldObject(object_id, class_name, name, **spec)


def at(x: float, y: float = 0.0, z: float = 0.0) -> Placement:
    return Placement("at", None, (x, y, z))


def on(parent: str, dx: float = 0.0, dy: float = 0.0) -> Placement:
    return Placement("on", parent, (dx, dy, 0.0))


def inside(parent: str, dx: float = 0.0, dy: float = 0.0) -> Placement:
    return Placement("in", parent, (dx, dy, 0.0))


def step(subgoal: str, verb: str, *args: str, end: int | None = None) -> PlannedAction:
    return PlannedAction(subgoal, verb, tuple(args), Timestamp(end) if end is not None else None)


def spans(ends: list[int], slots: dict[int, tuple] | None = None) -> list[StepSpan]:
    out, start = [], 0
    for i, end in enumerate(ends):
        out.append(StepSpan(i, start, end, (slots or {}).get(i)))
        start = end + 1
    return out


def make_task(name, goal_text, preds, plan, objects) -> TaskSpec:
    return TaskSpec(name, goal_text, tuple(preds), tuple(plan), executable_actions(objects), AUDIO_LABELS)


def _annotate(category: str, at_: int, lo: int, hi: int, **params) -> tuple[FailureInjection, Annotation]:
    inj = FailureInjection(category, Timestamp(at_), params)
    return inj, Annotation(inj.failure_type, category, ((Timestamp(lo), Timestamp(hi)),))


# ---------------------------------------------------------------------------
# boil water


def _boil_world():
    objs = [
        make_object("faucet-1", "faucet", "faucet"),
        make_object("stoveburner-2", "stove burner", "second stove burner"),
        make_object("sink-1", "sink", "sink"),
        make_object("pot-1", "pot", "pot"),
        make_object("stoveburner-4", "stove burner", "fourth stove burner"),
        make_object("stoveburner-3", "stove burner", "third stove burner"),
        make_object("stoveburner-1", "stove burner", "first stove burner"),
        make_object("soapbottle-1", "soap bottle", "soap bottle"),
        make_object("potato-1", "potato", "potato"),
        make_object("countertop-3", "countertop", "third countertop"),
    ]
    placements = {
        "sink-1": at(-1.0),
        "faucet-1": at(-1.0, 0.65),
        "soapbottle-1": at(-1.30),
        "countertop-3": at(0.3),
        "potato-1": on("countertop-3"),
        "pot-1": on("countertop-3", -0.25),
        "stoveburner-1": at(1.3),
        "stoveburner-2": at(2.0),
        "stoveburner-3": at(2.7),
        "stoveburner-4": at(3.4),
    }
    return objs, placements


BOIL_GOAL = "a pot is filled with water, the pot is on top of a stove burner that is turned on"
BOIL_PREDICATES = [
    GoalPredicate("object_state", "pot-1", None, "filled with water"),
    GoalPredicate("relation", "pot-1", "stoveburner-4", "on_top_of"),
    GoalPredicate("object_state", "stoveburner-4", None, "turned on"),
]


def _boil_plan(ends, burner_put="stoveburner-4", burner_on="stoveburner-4", put_text=None, on_text=None):
    names = {"stoveburner-2": "second stove burner", "stoveburner-4": "fourth stove burner"}
    return [
        step("pick up pot", "pick_up", "pot-1", end=ends[0]),
        step("put pot in sink", "put_in", "pot-1", "sink-1", end=ends[1]),
        step("toggle on faucet", "toggle_on", "faucet-1", end=ends[2]),
        step("toggle off faucet", "toggle_off", "faucet-1", end=ends[3]),
        step("pick up pot", "pick_up", "pot-1", end=ends[4]),
        step(put_text or f"put pot on {names[burner_put]}", "put_on", "pot-1", burner_put, end=ends[5]),
        step(on_text or f"toggle on {names[burner_on]}", "toggle_on", burner_on, end=ends[6]),
    ]


BOIL_ENDS = [18, 25, 28, 31, 34, 44, 47]


def boil_water_success() -> Scenario:
    objs, pl = _boil_world()
    task = make_task("boil water", BOIL_GOAL, BOIL_PREDICATES, _boil_plan(BOIL_ENDS), objs)
    return Scenario("boil_water_success", task, objs, pl, spans(BOIL_ENDS), 48, audio=[(28, 30, "water runs in sink")])


def _boil_drop_visibility(t: int) -> set[str]:
    # the robot's view while it walks the kitchen: counter first, then the
    # sink area (soap bottle briefly in view), then the stove
    burners = {"stoveburner-1", "stoveburner-2", "stoveburner-3", "stoveburner-4"}
    if t < 15:
        return {"countertop-3", "potato-1"}
    if t < 21:
        return {"pot-1"}
    if t < 23:
        return {"pot-1", "faucet-1", "sink-1", "soapbottle-1"}
    if t < 38:
        return {"pot-1", "faucet-1", "sink-1"}
    if t < 42:
        return {"faucet-1", "sink-1"}
    return burners


def boil_water_drop() -> Scenario:
    objs, pl = _boil_world()
    task = make_task("boil water", BOIL_GOAL, BOIL_PREDICATES, _boil_plan(BOIL_ENDS), objs)
    inj, ann = _annotate("drop", 36, 36, 44, object="pot-1")
    return Scenario(
        "boil_water_drop",
        task,
        objs,
        pl,
        spans(BOIL_ENDS),
        48,
        events=[WorldEvent(36, "drop", "pot-1", on("countertop-3", 0.25), spill=True)],
        audio=[(28, 30, "water runs in sink"), (36, 36, "something drops")],
        visibility=_boil_drop_visibility,
        injected_failure=inj,
        annotation=ann,
    )


def boil_water_wrong_burner() -> Scenario:
    objs, pl = _boil_world()
    ends = [18, 25, 28, 31, 34, 46, 49]
    plan = _boil_plan(ends, "stoveburner-4", "stoveburner-2", "put pot on stove burner", "toggle on stove burner")
    task = make_task("boil water", BOIL_GOAL, BOIL_PREDICATES, plan, objs)
    inj, ann = _annotate("wrong_plan_target", 46, 46, 49, wrong="stoveburner-2")
    return Scenario(
        "boil_water_wrong_burner", task, objs, pl, spans(ends), 50,
        audio=[(28, 30, "water runs in sink")], injected_failure=inj, annotation=ann,
    )


# ---------------------------------------------------------------------------
# toast bread

TOAST_GOAL = "a bread slice is inside a toaster that is turned on"
TOAST_PREDICATES = [
    GoalPredicate("relation", "bread-1", "toaster-1", "inside"),
    GoalPredicate("object_state", "toaster-1", None, "turned on"),
]


def _toast_world():
    objs = [
        make_object("bread-1", "bread", "bread"),
        make_object("toaster-1", "toaster", "toaster"),
        make_object("countertop-1", "countertop", "countertop"),
    ]
    pl = {"countertop-1": at(0.0), "bread-1": on("countertop-1", -0.2), "toaster-1": at(1.0)}
    return objs, pl


def _toast_plan(ends, with_toggle=True):
    plan = [
        step("pick up bread", "pick_up", "bread-1", end=ends[0]),
        step("put bread in toaster", "put_in", "bread-1", "toaster-1", end=ends[1]),
    ]
    if with_toggle:
        plan.append(step("toggle on toaster", "toggle_on", "toaster-1", end=ends[2]))
    return plan


def toast_bread_success() -> Scenario:
    objs, pl = _toast_world()
    ends = [6, 12, 15]
    task = make_task("toast bread", TOAST_GOAL, TOAST_PREDICATES, _toast_plan(ends), objs)
    return Scenario("toast_bread_success", task, objs, pl, spans(ends), 16)


def toast_bread_drop() -> Scenario:
    objs, pl = _toast_world()
    ends = [6, 12, 15]
    task = make_task("toast bread", TOAST_GOAL, TOAST_PREDICATES, _toast_plan(ends), objs)
    inj, ann = _annotate("drop", 9, 9, 12, object="bread-1")
    return Scenario(
        "toast_bread_drop", task, objs, pl, spans(ends), 16,
        events=[WorldEvent(9, "drop", "bread-1", at(0.6, -0.8))],
        audio=[(9, 9, "something drops")],
        injected_failure=inj, annotation=ann,
    )


def toast_bread_no_toggle() -> Scenario:
    objs, pl = _toast_world()
    ends = [6, 12]
    task = make_task("toast bread", TOAST_GOAL, TOAST_PREDICATES, _toast_plan(ends, with_toggle=False), objs)
    inj, ann = _annotate("unmet_goal", 12, 12, 12, missing="toggle_on (toaster-1)")
    return Scenario("toast_bread_no_toggle", task, objs, pl, spans(ends), 13, injected_failure=inj, annotation=ann)


# ---------------------------------------------------------------------------
# fry egg

FRY_GOAL = "a cracked egg is in a pan, the pan is on top a stove burner that is turned on"
FRY_PREDICATES = [
    GoalPredicate("object_state", "egg-1", None, "cracked"),
    GoalPredicate("relation", "egg-1", "pan-1", "inside"),
    GoalPredicate("relation", "pan-1", "stoveburner-1", "on_top_of"),
    GoalPredicate("object_state", "stoveburner-1", None, "turned on"),
]


def _fry_world():
    objs = [
        make_object("pan-1", "pan", "pan"),
        make_object("egg-1", "egg", "egg"),
        make_object("fridge-1", "fridge", "fridge"),
        make_object("stoveburner-1", "stove burner", "first stove burner"),
        make_object("stoveburner-2", "stove burner", "second stove burner"),
        make_object("countertop-1", "countertop", "countertop"),
    ]
    pl = {
        "fridge-1": at(-1.3),
        "egg-1": inside("fridge-1"),
        "countertop-1": at(0.0),
        "pan-1": on("countertop-1", -0.2),
        "stoveburner-1": at(1.0),
        "stoveburner-2": at(1.7),
    }
    return objs, pl


def fry_egg_closed_fridge() -> Scenario:
    objs, pl = _fry_world()
    ends = [5, 10, 15, 17, 22, 25]
    plan = [
        step("pick up pan", "pick_up", "pan-1", end=ends[0]),
        step("put pan on first stove burner", "put_on", "pan-1", "stoveburner-1", end=ends[1]),
        step("pick up egg", "pick_up", "egg-1", end=ends[2]),
        step("crack egg", "crack", "egg-1", end=ends[3]),
        step("put egg in pan", "put_in", "egg-1", "pan-1", end=ends[4]),
        step("toggle on first stove burner", "toggle_on", "stoveburner-1", end=ends[5]),
    ]
    task = make_task("fry egg", FRY_GOAL, FRY_PREDICATES, plan, objs)
    inj, ann = _annotate("blocked_precondition", 11, 11, 15, container="fridge-1")
    return Scenario("fry_egg_closed_fridge", task, objs, pl, spans(ends), 26, injected_failure=inj, annotation=ann)


def fry_egg_wrong_burner() -> Scenario:
    objs, pl = _fry_world()
    ends = [5, 10, 15, 18, 20, 26, 29]
    plan = [
        step("pick up pan", "pick_up", "pan-1", end=ends[0]),
        step("put pan on second stove burner", "put_on", "pan-1", "stoveburner-2", end=ends[1]),
        step("open fridge", "open", "fridge-1", end=ends[2]),
        step("pick up egg", "pick_up", "egg-1", end=ends[3]),
        step("crack egg", "crack", "egg-1", end=ends[4]),
        step("put egg in pan", "put_in", "egg-1", "pan-1", end=ends[5]),
        step("toggle on first stove burner", "toggle_on", "stoveburner-1", end=ends[6]),
    ]
    task = make_task("fry egg", FRY_GOAL, FRY_PREDICATES, plan, objs)
    inj, ann = _annotate("wrong_plan_target", 10, 10, 29, wrong="stoveburner-2")
    return Scenario("fry_egg_wrong_burner", task, objs, pl, spans(ends), 30, injected_failure=inj, annotation=ann)


# ---------------------------------------------------------------------------
# heat potato

HEAT_GOAL = "a potato is on a plate and inside a microwave that is turned on"
HEAT_PREDICATES = [
    GoalPredicate("relation", "potato-1", "plate-1", "on_top_of"),
    GoalPredicate("relation", "plate-1", "microwave-1", "inside"),
    GoalPredicate("object_state", "microwave-1", None, "turned on"),
]


def _heat_world(stuck: int = 0):
    objs = [
        make_object("potato-1", "potato", "potato"),
        make_object("plate-1", "plate", "plate"),
        make_object("microwave-1", "microwave", "microwave", stuck=stuck),
        make_object("countertop-1", "countertop", "countertop"),
    ]
    pl = {
        "countertop-1": at(0.0),
        "potato-1": on("countertop-1", -0.25),
        "plate-1": on("countertop-1", 0.2),
        "microwave-1": at(1.1),
    }
    return objs, pl


def heat_potato_stuck_door() -> Scenario:
    objs, pl = _heat_world(stuck=1)
    ends = [5, 8, 12, 14, 18, 20, 22]
    plan = [
        step("pick up potato", "pick_up", "potato-1", end=ends[0]),
        step("put potato on plate", "put_on", "potato-1", "plate-1", end=ends[1]),
        step("open microwave", "open", "microwave-1", end=ends[2]),
        step("pick up plate", "pick_up", "plate-1", end=ends[3]),
        step("put plate in microwave", "put_in", "plate-1", "microwave-1", end=ends[4]),
        step("close microwave", "close", "microwave-1", end=ends[5]),
        step("toggle on microwave", "toggle_on", "microwave-1", end=ends[6]),
    ]
    task = make_task("heat potato", HEAT_GOAL, HEAT_PREDICATES, plan, objs)
    inj, ann = _annotate("blocked_precondition", 9, 9, 12, stuck="microwave-1")
    return Scenario("heat_potato_stuck_door", task, objs, pl, spans(ends), 23, injected_failure=inj, annotation=ann)


def heat_potato_no_plate() -> Scenario:
    objs, pl = _heat_world()
    ends = [4, 8, 12, 14, 16]
    plan = [
        step("open microwave", "open", "microwave-1", end=ends[0]),
        step("pick up potato", "pick_up", "potato-1", end=ends[1]),
        step("put potato in microwave", "put_in", "potato-1", "microwave-1", end=ends[2]),
        step("close microwave", "close", "microwave-1", end=ends[3]),
        step("toggle on microwave", "toggle_on", "microwave-1", end=ends[4]),
    ]
    task = make_task("heat potato", HEAT_GOAL, HEAT_PREDICATES, plan, objs)
    inj, ann = _annotate("wrong_plan_target", 12, 12, 16, skipped="plate-1")
    return Scenario("heat_potato_no_plate", task, objs, pl, spans(ends), 17, injected_failure=inj, annotation=ann)


# ---------------------------------------------------------------------------
# serve coffee

COFFEE_GOAL = "a clean mug is filled with coffee and on top of the countertop"
COFFEE_PREDICATES = [
    GoalPredicate("object_state", "mug-1", None, "filled with coffee"),
    GoalPredicate("object_state", "mug-1", None, "clean"),
    GoalPredicate("relation", "mug-1", "countertop-1", "on_top_of"),
]


def _coffee_world(cup_in_machine: bool):
    objs = [
        make_object("mug-1", "mug", "mug"),
        make_object("coffeemachine-1", "coffee machine", "coffee machine"),
        make_object("countertop-1", "countertop", "countertop"),
        make_object("cup-1", "cup", "cup"),
    ]
    pl = {
        "countertop-1": at(0.0),
        "mug-1": on("countertop-1", -0.2),
        "coffeemachine-1": at(1.0),
        "cup-1": inside("coffeemachine-1") if cup_in_machine else on("countertop-1", 0.25),
    }
    return objs, pl


def serve_coffee_blocked() -> Scenario:
    objs, pl = _coffee_world(cup_in_machine=True)
    ends = [5, 10, 13, 16, 19, 24]
    plan = [
        step("pick up mug", "pick_up", "mug-1", end=ends[0]),
        step("put mug in coffee machine", "put_in", "mug-1", "coffeemachine-1", end=ends[1]),
        step("toggle on coffee machine", "toggle_on", "coffeemachine-1", end=ends[2]),
        step("toggle off coffee machine", "toggle_off", "coffeemachine-1", end=ends[3]),
        step("pick up mug", "pick_up", "mug-1", end=ends[4]),
        step("put mug on countertop", "put_on", "mug-1", "countertop-1", end=ends[5]),
    ]
    task = make_task("serve coffee", COFFEE_GOAL, COFFEE_PREDICATES, plan, objs)
    inj, ann = _annotate("blocked_precondition", 6, 6, 10, blocker="cup-1")
    return Scenario(
        "serve_coffee_blocked", task, objs, pl, spans(ends, {5: (-0.2, 0.0, 0.0)}), 25,
        audio=[(13, 15, "coffee machine brews")], injected_failure=inj, annotation=ann,
    )


def serve_coffee_wrong_order() -> Scenario:
    objs, pl = _coffee_world(cup_in_machine=False)
    ends = [4, 7, 11, 15, 18, 23]
    plan = [
        step("toggle on coffee machine", "toggle_on", "coffeemachine-1", end=ends[0]),
        step("toggle off coffee machine", "toggle_off", "coffeemachine-1", end=ends[1]),
        step("pick up mug", "pick_up", "mug-1", end=ends[2]),
        step("put mug in coffee machine", "put_in", "mug-1", "coffeemachine-1", end=ends[3]),
        step("pick up mug", "pick_up", "mug-1", end=ends[4]),
        step("put mug on countertop", "put_on", "mug-1", "countertop-1", end=ends[5]),
    ]
    task = make_task("serve coffee", COFFEE_GOAL, COFFEE_PREDICATES, plan, objs)
    inj, ann = _annotate("wrong_plan_order", 4, 4, 23, early="toggle_on (coffeemachine-1)")
    return Scenario(
        "serve_coffee_wrong_order", task, objs, pl, spans(ends, {5: (-0.2, 0.0, 0.0)}), 24,
        audio=[(4, 6, "coffee machine brews")], injected_failure=inj, annotation=ann,
    )


# ---------------------------------------------------------------------------
# store egg

STORE_GOAL = "a bowl with an egg is stored inside the fridge"
STORE_PREDICATES = [
    GoalPredicate("relation", "egg-1", "bowl-1", "inside"),
    GoalPredicate("relation", "bowl-1", "fridge-1", "inside"),
]


def _store_world(egg_present: bool = True):
    objs = [
        make_object("egg-1", "egg", "egg", present=egg_present),
        make_object("bowl-1", "bowl", "bowl"),
        make_object("fridge-1", "fridge", "fridge"),
        make_object("cabinet-1", "cabinet", "cabinet"),
        make_object("countertop-1", "countertop", "countertop"),
    ]
    pl = {
        "countertop-1": at(0.0),
        "bowl-1": on("countertop-1", 0.2),
        "fridge-1": at(-1.3),
        "cabinet-1": at(1.2),
    }
    if egg_present:
        pl["egg-1"] = on("countertop-1", -0.25)
    return objs, pl


def _store_plan(ends, box: str, box_name: str):
    return [
        step("pick up egg", "pick_up", "egg-1", end=ends[0]),
        step("put egg in bowl", "put_in", "egg-1", "bowl-1", end=ends[1]),
        step(f"open {box_name}", "open", box, end=ends[2]),
        step("pick up bowl", "pick_up", "bowl-1", end=ends[3]),
        step(f"put bowl in {box_name}", "put_in", "bowl-1", box, end=ends[4]),
        step(f"close {box_name}", "close", box, end=ends[5]),
    ]


STORE_ENDS = [5, 8, 13, 15, 20, 23]


def store_egg_missing() -> Scenario:
    objs, pl = _store_world(egg_present=False)
    task = make_task("store egg", STORE_GOAL, STORE_PREDICATES, _store_plan(STORE_ENDS, "fridge-1", "fridge"), objs)
    inj, ann = _annotate("missing_object", 0, 0, 5, object="egg-1")
    return Scenario("store_egg_missing", task, objs, pl, spans(STORE_ENDS), 24, injected_failure=inj, annotation=ann)


def store_egg_wrong_container() -> Scenario:
    objs, pl = _store_world()
    task = make_task("store egg", STORE_GOAL, STORE_PREDICATES, _store_plan(STORE_ENDS, "cabinet-1", "cabinet"), objs)
    inj, ann = _annotate("wrong_plan_target", 13, 13, 23, wrong="cabinet-1")
    return Scenario("store_egg_wrong_container", task, objs, pl, spans(STORE_ENDS), 24, injected_failure=inj, annotation=ann)


SCENARIOS: dict[str, Callable[[], Scenario]] = {
    "boil_water_success": boil_water_success,
    "toast_bread_success": toast_bread_success,
    "boil_water_drop": boil_water_drop,
    "toast_bread_drop": toast_bread_drop,
    "fry_egg_closed_fridge": fry_egg_closed_fridge,
    "heat_potato_stuck_door": heat_potato_stuck_door,
    "serve_coffee_blocked": serve_coffee_blocked,
    "store_egg_missing": store_egg_missing,
    "boil_water_wrong_burner": boil_water_wrong_burner,
    "toast_bread_no_toggle": toast_bread_no_toggle,
    "fry_egg_wrong_burner": fry_egg_wrong_burner,
    "heat_potato_no_plate": heat_potato_no_plate,
    "serve_coffee_wrong_order": serve_coffee_wrong_order,
    "store_egg_wrong_container": store_egg_wrong_container,
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None


def all_scenarios() -> list[Scenario]:
    return [f() for f in SCENARIOS.values()]
