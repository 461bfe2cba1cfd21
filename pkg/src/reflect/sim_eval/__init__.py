"""Scripted kitchen simulator, plan execution and offline evaluation."""

from .runner import (
    EvalResult,
    ScenarioResult,
    ScriptConflict,
    analyze_log,
    check_script,
    evaluate,
    evaluate_one,
    execute_plan,
    generate,
    scenario_camera,
    simulate,
)
from .scenarios import (
    FAILURE_CATEGORIES,
    SCENARIOS,
    Annotation,
    FailureInjection,
    Scenario,
    StepSpan,
    WorldEvent,
    all_scenarios,
    get_scenario,
)
from .world import IllegalTransition, Placement, World, WorldObject, executable_actions
