"""Deterministic rule-based stand-in for the language model.

``OracleBackend`` answers the same prompts a live model would, but from the
structured summaries it was bound to rather than from the prompt prose. The
prompt is only used to route the query and to recover its slot values
(subgoal text, failure time). Explanations are templated so that the
extracted failure times and grounded corrections are exact by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..log_model import GoalPredicate, ObjectDecl, Timestamp, format_action
from ..scene_graph import SceneGraph
from ..summary import RELATION_PHRASES, Summaries, SubgoalEntry
from . import prompts
from .backends import BackendFailure
from .core import oracle_verify, plan_steps, unmet_predicates

_VERIFY_RE = re.compile(
    r"^The robot goal is to (?P<goal>.*?)\. Here are the robot observations after execution: \n(?P<obs>.*)\nQ: Is the goal satisfied\?",
    re.DOTALL,
)
_FAIL_RE = re.compile(r"At (\d{2,}:\d{2}), a failure was identified\.")


class OracleBackend:
    """Rule-based backend; call ``bind`` with a log's summaries before use."""

    def __init__(self):
        self.ctx: Summaries | None = None

    def bind(self, summaries: Summaries) -> None:
        self.ctx = summaries

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        if self.ctx is None:
            raise BackendFailure("oracle backend used before bind()")
        if system_prompt == prompts.VERIFY_SYSTEM:
            return self._verify(user_prompt)
        if system_prompt == prompts.EXECUTION_SYSTEM:
            return self._execution(user_prompt)
        if system_prompt == prompts.PLANNING_SYSTEM:
            if user_prompt.endswith(prompts.TIME_QUESTION):
                return self._planning_time()
            return self._planning()
        if system_prompt == prompts.CORRECTION_SYSTEM:
            return self._correction()
        raise BackendFailure("oracle backend does not recognise this prompt")

    # -- helpers -----------------------------------------------------------

    def _name(self, oid: str) -> str:
        decl = self.ctx.log.objects.get(oid)
        return decl.name if decl else oid

    def _entry_for(self, goal: str, obs: str) -> SubgoalEntry:
        entries = self.ctx.subgoals.entries
        for e in entries:
            if e.subgoal_text.rstrip(".") == goal and e.caption.observation() == obs:
                return e
        for e in entries:
            if e.caption.observation() == obs:
                return e
        raise BackendFailure(f"oracle has no subgoal entry for {goal!r}")

    # -- verification -------------------------------------------------------

    def _verify(self, user: str) -> str:
        m = _VERIFY_RE.match(user)
        if not m:
            raise BackendFailure("malformed verification prompt")
        entry = self._entry_for(m.group("goal"), m.group("obs"))
        step = self.ctx.log.task.plan[entry.index]
        return "Yes" if oracle_verify(step, entry.graph) else "No"

    # -- execution analysis ---------------------------------------------------

    def _execution(self, user: str) -> str:
        m = _FAIL_RE.search(user)
        if not m:
            raise BackendFailure("execution prompt has no failure time")
        t_fail = Timestamp.parse(m.group(1))
        task = self.ctx.log.task
        entry = next(
            (e for e in self.ctx.subgoals.entries if e.t == t_fail and not oracle_verify(task.plan[e.index], e.graph)),
            None,
        )
        if entry is None:
            return f"At {t_fail}, the expected outcome was not observed."
        goal = entry.subgoal_text
        drop = self._find_drop(t_fail)
        if drop is not None:
            t_drop, obj, labels = drop
            heard = ", ".join(labels)
            return (
                f"At {t_fail}, the robot tried to {goal} but {self._name(obj)} was no longer in its gripper. "
                f"{self._name(obj).capitalize()} fell from the gripper at {t_drop} ({heard})."
            )
        reason = self._precondition(task.plan[entry.index], entry.graph)
        if reason is not None:
            return f"At {t_fail}, the robot could not {goal} because {reason}."
        return f"At {t_fail}, the robot failed to {goal}; the expected outcome was not observed."

    def _find_drop(self, t_fail: Timestamp):
        """Last key frame up to t_fail where the held object vanished with a sound."""
        kfs = [k for k in self.ctx.events.key_frames if k.t <= t_fail]
        for prev, cur in reversed(list(zip(kfs, kfs[1:]))):
            held = prev.graph.held_object()
            if held is not None and cur.graph.held_object() != held and cur.audio_labels:
                return cur.t, held, cur.audio_labels
        return None

    def _precondition(self, step, graph: SceneGraph) -> str | None:
        args = step.arguments
        target = args[0] if args else None
        if target is not None and graph.node(target) is None:
            return f"{self._name(target)} was not found"
        if step.action_verb in ("pick_up", "put_in", "put_on"):
            for e in graph.edges:
                if e.subject == target and e.name == "inside" and "closed" in (graph.node(e.object).state or ""):
                    return f"{self._name(e.object)} was closed"
        if step.action_verb == "put_in":
            box = args[1]
            node = graph.node(box)
            if node is not None and "closed" in (node.state or ""):
                return f"{self._name(box)} was closed"
            blockers = sorted(e.subject for e in graph.edges if e.name == "inside" and e.object == box and e.subject != target)
            if blockers:
                return f"{self._name(box)} was occupied by {self._name(blockers[0])}"
        if step.action_verb == "toggle_on" and "open" in (graph.node(target).state or ""):
            return f"{self._name(target)} was left open"
        if step.action_verb == "open" and "closed" in (graph.node(target).state or ""):
            return f"{self._name(target)} stayed closed"
        return None

    # -- planning analysis ----------------------------------------------------

    def _first_unmet(self) -> GoalPredicate | None:
        unmet = unmet_predicates(self.ctx.log.task, self.ctx.final_graph)
        return unmet[0] if unmet else None

    def _planning(self) -> str:
        p = self._first_unmet()
        if p is None:
            return "The final state satisfies the goal."
        g = self.ctx.final_graph
        subj = self._name(p.subject)
        if p.kind == "object_state":
            siblings = [
                n.name or n.object_id
                for n in g.object_nodes
                if n.object_id != p.subject
                and n.class_name == self._class(p.subject)
                and p.value in (n.state or "")
            ]
            node = g.node(p.subject)
            now = node.state if node is not None and node.state else "unobserved"
            text = f"The goal needs {subj} to be {p.value}, but it ends {now}."
            if siblings:
                text += f" The plan acted on {siblings[0]} instead of {subj}."
            return text
        if p.kind == "relation":
            phrase = RELATION_PHRASES.get(p.value, p.value.replace("_", " "))
            return f"The plan never leaves {subj} {phrase.removeprefix('is ')} {self._name(p.object)}."
        if p.kind == "holding":
            return f"The plan should end with {subj} in the gripper."
        return f"The plan should end with {subj} out of the gripper."

    def _planning_time(self) -> str:
        p = self._first_unmet()
        steps = plan_steps(self.ctx.log.task, self.ctx.subgoals.entries)
        plan = self.ctx.log.task.plan
        chosen = None
        if p is not None:
            for i, step in enumerate(plan):
                if p.subject in step.arguments and steps[i][0] is not None:
                    chosen = steps[i][0]
        if chosen is None:
            timed = [t for t, _ in steps if t is not None]
            if not timed:
                return "No time step is available."
            chosen = timed[-1]
        return chosen.render()

    def _class(self, oid: str) -> str:
        decl = self.ctx.log.objects.get(oid)
        return decl.class_name if decl else oid

    # -- correction -----------------------------------------------------------

    def _correction(self) -> str:
        belief = Belief.from_graph(self.ctx.final_graph, self.ctx.log.objects)
        steps = correction_steps(self.ctx.log.task.goal_predicates, belief)
        if not steps:
            return "do nothing"
        return ", ".join(steps)


@dataclass
class Belief:
    """What the robot believes about the world, built from a scene graph."""

    objects: dict[str, ObjectDecl]
    states: dict[str, set[str]]
    parent: dict[str, tuple[str, str]]  # object -> (relation, container)
    held: str | None
    steps: list[str] = field(default_factory=list)

    @classmethod
    def from_graph(cls, graph: SceneGraph, objects) -> "Belief":
        states = {n.object_id: set(_parts(n.state)) for n in graph.object_nodes}
        inside: dict[str, set[str]] = {}
        for e in graph.edges:
            if e.name == "inside":
                inside.setdefault(e.subject, set()).add(e.object)
        parent: dict[str, tuple[str, str]] = {}
        for subj, boxes in inside.items():
            # nested containers: the innermost one sits inside the most others
            parent[subj] = ("inside", max(sorted(boxes), key=lambda b: len(inside.get(b, set()) & boxes)))
        for e in sorted(graph.edges):
            if e.name == "on_top_of" and e.subject not in parent:
                parent[e.subject] = (e.name, e.object)
        return cls(dict(objects), states, parent, graph.held_object())

    def of_class(self, cls: str) -> list[str]:
        return [oid for oid, d in self.objects.items() if d.class_name == cls]

    def has(self, oid: str, part: str) -> bool:
        return any(part in p for p in self.states.get(oid, ()))

    def set_state(self, oid: str, remove: str, add: str) -> None:
        s = self.states.setdefault(oid, set())
        s.difference_update({p for p in s if remove and remove in p})
        s.add(add)

    def emit(self, verb: str, *args: str) -> None:
        self.steps.append(format_action(verb, args))

    # -- primitive moves, each updating the belief ------------------------

    def surface(self) -> str | None:
        counters = self.of_class("countertop")
        return counters[0] if counters else None

    def free_hand(self) -> None:
        if self.held is None:
            return
        spot = self.surface()
        if spot is None:
            return
        self.emit("put_on", self.held, spot)
        self.parent[self.held] = ("on_top_of", spot)
        self.held = None

    def open(self, oid: str) -> None:
        self.free_hand()
        self.emit("open", oid)
        self.set_state(oid, "closed", "open")
        if self.has(oid, "turned on"):
            self.set_state(oid, "turned on", "turned off")

    def close(self, oid: str) -> None:
        self.free_hand()
        self.emit("close", oid)
        self.set_state(oid, "open", "closed")

    def hold(self, oid: str) -> None:
        if self.held == oid:
            return
        self.free_hand()
        rel = self.parent.get(oid)
        if rel is not None and rel[0] == "inside" and self.has(rel[1], "closed"):
            self.open(rel[1])
        self.emit("pick_up", oid)
        self.parent.pop(oid, None)
        self.held = oid

    def place(self, oid: str, relation: str, target: str) -> None:
        if relation == "inside" and self.has(target, "closed"):
            if self.held == oid:
                self.free_hand()
            self.open(target)
        self.hold(oid)
        self.emit("put_in" if relation == "inside" else "put_on", oid, target)
        self.parent[oid] = (relation, target)
        self.held = None

    def toggle(self, oid: str, on: bool) -> None:
        if on and self.has(oid, "open"):
            self.close(oid)
        self.emit("toggle_on" if on else "toggle_off", oid)
        self.set_state(oid, "turned off" if on else "turned on", "turned on" if on else "turned off")


def _parts(text: str | None) -> list[str]:
    return [p.strip() for p in (text or "").split(" and ") if p.strip()]


def _fill(b: Belief, oid: str, liquid: str) -> None:
    if liquid == "water":
        sinks, faucets = b.of_class("sink"), b.of_class("faucet")
        if not sinks or not faucets:
            return
        if b.parent.get(oid) != ("inside", sinks[0]):
            b.place(oid, "inside", sinks[0])
        if b.has(faucets[0], "turned on"):
            b.toggle(faucets[0], False)
        b.toggle(faucets[0], True)
        b.toggle(faucets[0], False)
    else:
        machines = b.of_class("coffee machine")
        if not machines:
            return
        m = machines[0]
        for other, (rel, box) in sorted(b.parent.items()):
            if rel == "inside" and box == m and other != oid and b.surface():
                b.place(other, "on_top_of", b.surface())
        if b.parent.get(oid) != ("inside", m):
            b.place(oid, "inside", m)
        if b.has(m, "turned on"):
            b.toggle(m, False)
        b.toggle(m, True)
    b.set_state(oid, "empty", f"filled with {liquid}")


def correction_steps(goal: tuple[GoalPredicate, ...], b: Belief) -> list[str]:
    """Predicate diff: emit the actions that make each unmet goal predicate hold."""
    required_on = {p.subject for p in goal if p.kind == "object_state" and "turned on" in p.value}
    for p in goal:
        if p.kind == "relation" and p.value in ("inside", "on_top_of"):
            if b.parent.get(p.subject) != (p.value, p.object):
                b.place(p.subject, p.value, p.object)
        elif p.kind == "object_state":
            for part in _parts(p.value):
                if b.has(p.subject, part):
                    continue
                if part == "turned on":
                    cls = b.objects[p.subject].class_name if p.subject in b.objects else None
                    for sib in b.of_class(cls) if cls else ():
                        if sib != p.subject and sib not in required_on and b.has(sib, "turned on"):
                            b.toggle(sib, False)
                    b.toggle(p.subject, True)
                elif part == "turned off":
                    b.toggle(p.subject, False)
                elif part == "open":
                    b.open(p.subject)
                elif part == "closed":
                    b.close(p.subject)
                elif part.startswith("filled with "):
                    _fill(b, p.subject, part[len("filled with "):])
                elif part in ("sliced", "cracked"):
                    if part == "cracked":
                        b.hold(p.subject)
                    b.emit("slice" if part == "sliced" else "crack", p.subject)
                    b.set_state(p.subject, "", part)
        elif p.kind == "holding":
            b.hold(p.subject)
        elif p.kind == "not_holding" and b.held == p.subject:
            b.free_hand()
    return b.steps

