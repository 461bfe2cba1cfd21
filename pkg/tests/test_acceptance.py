"""Acceptance criteria, one test each; every test prints a PASS/FAIL/SKIP line."""

import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, FIXTURES, golden, recorded_prompts, run_scenario
from generators import random_triple
from goldens import (
    caption_lines,
    correction_slots,
    execution_slots,
    same,
    same_state_up_to_order,
    same_up_to_visual_order,
)
from oracles import brute_argmax_cosine, brute_relate, check_apply, decision_ops, rule_decide
from reflect.config import AggregationConfig
from reflect.geometry import ObjectInstance, apply, decide
from reflect.log_model import Timestamp
from reflect.percepts import LabelSet, classify, segment_audio
from reflect.reason import HttpBackend, ReplayBackend, plan_correction, prompts, run_progressive
from reflect.relations import relate
from reflect.sim_eval import all_scenarios
from reflect.summary import render_state
from relation_cases import CAMERA, all_cases


def record(ok: bool, criterion: str, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_spatial_relation_suite():
    cases = all_cases()
    t0 = time.perf_counter()
    wrong = []
    for c in cases:
        a = ObjectInstance("a", "a", c.a, Timestamp(0))
        b = ObjectInstance("b", "b", c.b, Timestamp(0))
        r = relate(a, b, CAMERA, c.cfg)
        got = None if r is None else (r.subject, r.name, r.object)
        ref = brute_relate("a", c.a, "b", c.b, CAMERA, c.cfg, c.cfg.swap_occlusion)
        if not (got == ref == c.expected):
            wrong.append(c.name)
    elapsed = time.perf_counter() - t0
    ok = len(cases) >= 40 and not wrong and elapsed < 1.0
    record(ok, "spatial relations", f"{len(cases)} pairs, {len(cases) - len(wrong)} agree, {elapsed:.3f} s"
           + (f", disagreeing: {wrong}" if wrong else ""))


def test_aggregation_suite():
    rng = np.random.default_rng(20240)
    d = AggregationConfig().replace_threshold_d
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        prev, curr, robot = random_triple(rng)
        decisions = decide(prev, curr, robot)
        expected = rule_decide(
            {k: v.centroid for k, v in prev.objects.items()},
            {k: v.centroid for k, v in curr.objects.items()},
            robot.held_object,
            d,
        )
        mismatches += decision_ops(decisions, prev, curr) != expected
        check_apply(prev, curr, decisions, apply(prev, curr, decisions))
    elapsed = time.perf_counter() - t0
    record(mismatches == 0 and elapsed < 5.0, "aggregation",
           f"1000 triples, {mismatches} decide mismatches, invariants held, {elapsed:.2f} s")


def test_caption_and_prompt_goldens():
    failed = []
    _, _, s = run_scenario("boil_water_drop")
    for stamp, line in caption_lines().items():
        cap = s.events.at(Timestamp.parse(stamp))
        if cap is None or not same(cap.one_line(), line):
            failed.append(f"caption {stamp}")
    _, _, wb = run_scenario("boil_water_wrong_burner")
    if render_state(wb.final_graph) != golden("final_state_boil_water_wrong_burner.txt").strip():
        failed.append("final state")

    for name, const in [("verify", prompts.VERIFY_SYSTEM), ("execution", prompts.EXECUTION_SYSTEM),
                        ("planning", prompts.PLANNING_SYSTEM), ("correction", prompts.CORRECTION_SYSTEM)]:
        if not same(const, golden(f"prompt_{name}_system.txt")):
            failed.append(f"{name} system")
    if not same(prompts.verify_prompt("[SUBGOAL]", "[OBSERVATION]")[1], golden("prompt_verify_template.txt")):
        failed.append("verify template")

    _, drop = recorded_prompts("boil_water_drop")
    verify = [u for sys_, u, _ in drop if sys_ == prompts.VERIFY_SYSTEM]
    for k in range(1, 7):
        want = golden(f"prompt_verify_{k}.txt")
        ok = same(verify[k - 1], want) if k not in (2, 6) else same_up_to_visual_order(verify[k - 1], want)
        if not ok:
            failed.append(f"verify {k}")

    text, history, at_fail = execution_slots()
    if not same(prompts.execution_prompt("boil water", Timestamp(44), history, at_fail)[1], text):
        failed.append("execution")

    _, burner = recorded_prompts("boil_water_wrong_burner")
    planning = [u for sys_, u, _ in burner if sys_ == prompts.PLANNING_SYSTEM]
    if not same(planning[0], golden("prompt_planning_user.txt")):
        failed.append("planning")
    if not (planning[1].startswith(planning[0]) and same(planning[1][len(planning[0]):].split("\n", 1)[1],
                                                          golden("prompt_time_followup.txt"))):
        failed.append("time follow-up")

    text, plan, reason, state, goal = correction_slots()
    if not same(prompts.correction_prompt("boil water", plan, reason, state, goal)[1], text):
        failed.append("correction")
    (corr,) = [u for sys_, u, _ in burner if sys_ == prompts.CORRECTION_SYSTEM]
    cur = next(ln for ln in corr.splitlines() if ln.startswith("Current state: "))[len("Current state: "):]
    if not same_state_up_to_order(cur, state):
        failed.append("correction state")

    record(not failed, "caption and prompt goldens",
           "7 captions, final state, 4 system prompts, verify template and 6 blocks, execution, planning, "
           "time follow-up, correction" + (f"; failed: {failed}" if failed else " all match"))


def test_end_to_end_oracle_run(suite_result):
    result, elapsed = suite_result
    kinds = [r.expected_type for r in result.results]
    annotations = {sc.name: sc.annotation for sc in all_scenarios()}
    every_time_in_range = all(
        r.failure_times and all(annotations[r.name].contains(Timestamp.parse(t)) for t in r.failure_times)
        for r in result.failures
    )
    errors = [r.name for r in result.results if r.error]
    ok = (
        len(kinds) >= 12 and kinds.count("execution") >= 6 and kinds.count("planning") >= 4
        and kinds.count("none") >= 2 and result.loc == 100.0 and every_time_in_range
        and result.coplan >= 80.0 and result.type_accuracy == 100.0 and elapsed < 60.0 and not errors
    )
    record(ok, "end-to-end oracle run",
           f"{len(kinds)} scenarios ({kinds.count('execution')} execution, {kinds.count('planning')} planning, "
           f"{kinds.count('none')} success), Loc {result.loc}, Co-plan {result.coplan}, "
           f"type accuracy {result.type_accuracy}, {elapsed:.1f} s" + (f", errors: {errors}" if errors else ""))


def test_audio_percepts_suite():
    rng = np.random.default_rng(77)
    mismatches = 0
    for _ in range(500):
        labels = LabelSet(tuple(f"label {i}" for i in range(20)), rng.normal(size=(20, 32)))
        e = rng.normal(size=32)
        got = classify(e, labels)[0]
        mismatches += got != labels.labels[brute_argmax_cosine(e.tolist(), labels.matrix.tolist())]

    rate = 16_000
    t = np.arange(rate) / rate
    x = np.concatenate([np.zeros(rate), 0.5 * np.sin(2 * np.pi * 440 * t), np.zeros(rate)])
    segs = [(float(a), float(b)) for a, b in segment_audio(x, rate)]
    tone_ok = len(segs) == 1 and abs(segs[0][0] - 1.0) <= 0.025 and abs(segs[0][1] - 2.0) <= 0.025

    labels = LabelSet(tuple(f"label {i}" for i in range(20)), rng.normal(size=(20, 32)))
    e = rng.normal(size=32)
    base = classify(e, labels)[0]
    changed = sum(classify(e * s, labels)[0] != base for s in np.exp(rng.uniform(-10, 10, 100)))

    record(mismatches == 0 and tone_ok and changed == 0, "audio and percepts",
           f"500 draws, {mismatches} mismatches; tone segment {segs}; {changed}/100 scalings changed the label")


def _analyze(name, backend):
    slog, _, s = run_scenario(name)
    report = run_progressive(slog, s, backend)
    plan = None
    if report.failure_type != "none":
        plan = plan_correction(slog.task, report, s.final_graph, backend, objects=slog.objects)
    return report, plan


def test_replay_regression():
    path = FIXTURES / "replay_transcript.json"
    names = ["boil_water_drop", "boil_water_wrong_burner", "boil_water_success"]
    same_reports = [_analyze(n, ReplayBackend(path)) == _analyze(n, ReplayBackend(path)) for n in names]
    kinds = [_analyze(n, ReplayBackend(path))[0].failure_type for n in names]
    record(all(same_reports) and kinds == ["execution", "planning", "none"], "replay regression",
           f"{sum(same_reports)}/3 scenarios replay to identical reports ({', '.join(kinds)})")


LIVE_URL = os.environ.get("REFLECT_LIVE_URL")


@pytest.mark.live
def test_live_wrong_burner_correction():
    if not LIVE_URL:
        line = "SKIP live smoke test: set REFLECT_LIVE_URL to run against a chat-completion endpoint"
        ACCEPTANCE_LINES.append(line)
        print(line)
        pytest.skip("REFLECT_LIVE_URL not set")
    report, plan = _analyze("boil_water_wrong_burner", HttpBackend(LIVE_URL))
    got = [a.template for a in plan.actions] if plan else []
    record(got == ["toggle_off (stoveburner-2)", "toggle_on (stoveburner-4)"], "live smoke test",
           f"{report.failure_type} failure, correction {got}")
