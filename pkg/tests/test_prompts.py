import pytest

from conftest import golden, recorded_prompts
from goldens import correction_slots, execution_slots, same, same_state_up_to_order, same_up_to_visual_order
from reflect.log_model import Timestamp
from reflect.reason import prompts

VERIFY_OBSERVATIONS = {
    1: ("pick up pot", "Visual observation: pot (empty and clean).\npot is inside robot gripper."),
    3: ("toggle on faucet", "Visual observation: pot (filled with water and clean), faucet (turned on), sink. "
        "pot (filled with water and clean) is inside sink. pot (filled with water and clean) is on the right of "
        "soap bottle. nothing is inside robot gripper. Auditory observation: water runs in sink."),
}


@pytest.mark.parametrize("name,const", [
    ("prompt_verify_system.txt", prompts.VERIFY_SYSTEM),
    ("prompt_execution_system.txt", prompts.EXECUTION_SYSTEM),
    ("prompt_planning_system.txt", prompts.PLANNING_SYSTEM),
    ("prompt_correction_system.txt", prompts.CORRECTION_SYSTEM),
])
def test_system_strings(name, const):
    assert same(const, golden(name))


def test_verify_template_slots():
    _, user = prompts.verify_prompt("[SUBGOAL]", "[OBSERVATION]")
    assert same(user, golden("prompt_verify_template.txt"))


@pytest.mark.parametrize("k", sorted(VERIFY_OBSERVATIONS))
def test_verify_prompt_with_given_observation(k):
    goal, obs = VERIFY_OBSERVATIONS[k]
    system, user = prompts.verify_prompt(goal, obs)
    assert system == prompts.VERIFY_SYSTEM
    assert same(user, golden(f"prompt_verify_{k}.txt"))


def _pipeline(name, system):
    _, exchanges = recorded_prompts(name)
    return [u for s, u, _ in exchanges if s == system]


@pytest.mark.parametrize("k", [1, 3, 4, 5])
def test_pipeline_verify_prompts_exact(k):
    users = _pipeline("boil_water_drop", prompts.VERIFY_SYSTEM)
    assert same(users[k - 1], golden(f"prompt_verify_{k}.txt"))


@pytest.mark.parametrize("k", [2, 6])
def test_pipeline_verify_prompts_up_to_visual_order(k):
    users = _pipeline("boil_water_drop", prompts.VERIFY_SYSTEM)
    assert same_up_to_visual_order(users[k - 1], golden(f"prompt_verify_{k}.txt"))


def test_execution_prompt_with_given_history():
    text, history, at_fail = execution_slots()
    system, user = prompts.execution_prompt("boil water", Timestamp.parse("00:44"), history, at_fail)
    assert system == prompts.EXECUTION_SYSTEM
    assert same(user, text)


def test_pipeline_execution_prompt_shape():
    (user,) = _pipeline("boil_water_drop", prompts.EXECUTION_SYSTEM)
    assert user.startswith("The robot task is to boil water.\nAt 00:44, a failure was identified.")
    assert user.endswith("briefly explain what happened at 00:44 and what caused the failure.\nA:")
    before = user.split("[Robot actions and observations before 00:44]\n", 1)[1].split("\n\n", 1)[0]
    stamps = [ln[:5] for ln in before.splitlines()]
    assert stamps == sorted(stamps) and all(s < "00:44" for s in stamps)
    assert {"00:18", "00:25", "00:28", "00:31", "00:34", "00:36"} <= set(stamps)


def test_pipeline_planning_prompt_exact():
    users = _pipeline("boil_water_wrong_burner", prompts.PLANNING_SYSTEM)
    assert same(users[0], golden("prompt_planning_user.txt"))


def test_time_followup():
    users = _pipeline("boil_water_wrong_burner", prompts.PLANNING_SYSTEM)
    assert len(users) == 2
    assert users[1].startswith(users[0])
    assert users[1].endswith(prompts.TIME_QUESTION)
    assert same(prompts.TIME_QUESTION, golden("prompt_time_followup.txt"))


def test_correction_prompt_with_given_slots():
    text, plan, reason, state, goal = correction_slots()
    system, user = prompts.correction_prompt("boil water", plan, reason, state, goal)
    assert system == prompts.CORRECTION_SYSTEM
    assert same(user, text)


def test_pipeline_correction_prompt():
    (user,) = _pipeline("boil_water_wrong_burner", prompts.CORRECTION_SYSTEM)
    _, plan, _, state, goal = correction_slots()
    got = [ln for ln in user.splitlines() if ln.strip()]
    assert got[:2] == ["Task: boil water", "Initial plan:"]
    assert [ln.split(". ", 1)[1] for ln in got if ln[:1].isdigit()] == plan
    cur = next(ln for ln in got if ln.startswith("Current state: "))[len("Current state: "):]
    assert same_state_up_to_order(cur, state)
    assert got[-2:] == [f"Success state: {goal}", "Correction plan:"]


def test_prompts_are_pure():
    a = prompts.planning_prompt("boil water", "done", "pot.", [(None, "pick up pot")])
    assert a == prompts.planning_prompt("boil water", "done", "pot.", [(None, "pick up pot")])
    assert "Goal: Pick up pot." in a[1]
