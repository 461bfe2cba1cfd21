"""Prompt templates for the verification, explanation and correction queries.

The system texts are fixed wire strings; user prompts are pure functions of
their slot values, so identical summaries always yield identical prompts.
Captions are joined onto one line before being placed in a prompt.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from ..log_model import Timestamp
from ..summary import Caption, capitalize

VERIFY_SYSTEM = (
    "You are a success verifier that outputs 'Yes' or 'No' to indicate whether "
    "the robot goal is satisfied given the robot observations."
)

EXECUTION_SYSTEM = (
    "You are expected to provide explanation for a robot failure. You are given the "
    "robot actions and observations so far. Briefly explain the failure in 1-2 sentence. "
    "Mention relevant time steps if possible."
)

PLANNING_SYSTEM = (
    "You are expected to provide explanation for a robot failure. You are given the "
    "current robot state, the goal condition, and the robot plan. Briefly explain what "
    "was wrong with the robot plan in 1-2 sentence."
)

CORRECTION_SYSTEM = (
    "Provide a plan with the available actions for the robot to correct its failure and finish the task.\n"
    "Available actions: pick up, put in some container, put on some receptacle, open (e.g. fridge), "
    "close, toggle on (e.g. faucet), toggle off, slice object, crack object (e.g. egg), "
    "pour (liquid) from A to B.\n"
    "The robot can only hold one object in its gripper, in other words, if there's object in the "
    "robot gripper, it can no longer pick up another object.\n"
    "The plan should 1) not contain any if statements 2) contain only the available actions "
    "3) resemble the format of the initial plan."
)

TIME_QUESTION = "Q: Which time step is most relevant to the above failure?\nA:"


def _sentence(text: str) -> str:
    """Drop one trailing period so templates can add their own."""
    text = text.strip()
    return text[:-1] if text.endswith(".") else text


def verify_prompt(subgoal_text: str, observation: str) -> tuple[str, str]:
    user = (
        f"The robot goal is to {_sentence(subgoal_text)}. "
        f"Here are the robot observations after execution: \n{observation}\n"
        "Q: Is the goal satisfied?\nA:"
    )
    return VERIFY_SYSTEM, user


def execution_prompt(
    task_name: str,
    t_fail: Timestamp,
    history: Sequence[Caption],
    at_fail: Caption | str,
) -> tuple[str, str]:
    t = t_fail.render()
    before = f"[Robot actions and observations before {t}]"
    end = f"[Observation at the end of {t}]"
    body = at_fail.body() if isinstance(at_fail, Caption) else at_fail
    lines = [
        f"The robot task is to {_sentence(task_name)}.",
        f"At {t}, a failure was identified.",
        "",
        before,
        *(c.one_line() for c in history),
        "",
        end,
        body,
        "",
        f"Q: Infer from {before} or {end}, briefly explain what happened at {t} and what caused the failure.",
        "A:",
    ]
    return EXECUTION_SYSTEM, "\n".join(lines)


def plan_lines(steps: Iterable[tuple[Timestamp | None, str]]) -> list[str]:
    out = []
    for t, subgoal in steps:
        goal = f"Goal: {capitalize(_sentence(subgoal))}."
        out.append(f"{t.render()}. {goal}" if t is not None else goal)
    return out


def planning_prompt(
    task_name: str,
    goal_text: str,
    final_state: str,
    steps: Iterable[tuple[Timestamp | None, str]],
) -> tuple[str, str]:
    lines = [
        f"The robot task is to {_sentence(task_name)}.",
        f"The task is considered successful if {_sentence(goal_text)}.",
        "Here's the robot observation at the end of the task execution:",
        final_state,
        "The robot plan is:",
        *plan_lines(steps),
        "",
        "Q: Known that all actions in the robot plan were executed successfully, "
        "what's wrong with the robot plan that caused the robot to fail?",
        "A:",
    ]
    return PLANNING_SYSTEM, "\n".join(lines)


def time_followup_prompt(planning_user: str, answer: str) -> tuple[str, str]:
    """Second turn of the planning query, replayed as one stateless prompt."""
    return PLANNING_SYSTEM, f"{planning_user} {answer.strip()}\n{TIME_QUESTION}"


def correction_prompt(
    task_name: str,
    initial_plan: Sequence[str],
    failure_reason: str,
    current_state: str,
    goal_text: str,
) -> tuple[str, str]:
    lines = [
        f"Task: {_sentence(task_name)}",
        "Initial plan:",
        *(f"{i}. {step}" for i, step in enumerate(initial_plan, 1)),
        f"Failure reason: {failure_reason.strip()}",
        f"Current state: {current_state}",
        f"Success state: {_sentence(goal_text)}.",
        "Correction plan:",
    ]
    return CORRECTION_SYSTEM, "\n".join(lines)
