import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import run_scenario
from generators import random_triple
from oracles import check_apply, decision_ops, rule_decide
from reflect.config import AggregationConfig
from reflect.geometry import (
    ADD,
    DELETE,
    REPLACE,
    UPDATE,
    AggregationDecision,
    MissingIntrinsics,
    ObjectInstance,
    SemanticPointCloud,
    ShapeMismatch,
    UnknownDecisionTarget,
    aggregate,
    apply,
    decide,
    project_frame,
)
from reflect.log_model import Camera, DepthView, Frame, ObjectDecl, RobotState, Timestamp

FREE = RobotState(True, None, 0, "executing")


def _obj(oid, pts, t=0):
    return ObjectInstance(oid, oid, np.asarray(pts, dtype=float), Timestamp(t))


def _cloud(t=0, **objs):
    return SemanticPointCloud({k: _obj(k, v, t) for k, v in objs.items()}, Timestamp(t))


def _depth_frame(depth, seg, cam):
    return Frame(Timestamp(0), FREE, {}, None, DepthView(np.asarray(depth, np.float32), np.asarray(seg, np.int32), cam))


def test_single_pixel_projects_to_depth_axis():
    cam = Camera(1.0, 1.0, 0.0, 0.0, np.eye(4))
    cloud = project_frame(_depth_frame([[2.0]], [[7]], cam), {"k": ObjectDecl("k", "thing", "thing", 7)})
    np.testing.assert_allclose(cloud.objects["k"].points, [[0.0, 0.0, 2.0]])


def test_zero_depth_gives_empty_cloud():
    cam = Camera(1.0, 1.0, 0.0, 0.0, np.eye(4))
    cloud = project_frame(_depth_frame(np.zeros((4, 4)), np.ones((4, 4)), cam), {"k": ObjectDecl("k", "x", "x", 1)})
    assert len(cloud) == 0


def test_background_label_dropped():
    cam = Camera(1.0, 1.0, 0.0, 0.0, np.eye(4))
    seg = [[0, 1], [1, 0]]
    cloud = project_frame(_depth_frame(np.ones((2, 2)), seg, cam), {"k": ObjectDecl("k", "x", "x", 1)})
    assert len(cloud.objects["k"]) == 2


def test_cube_face_centroid_matches_closed_form():
    # an 8x8 view of one cube face at constant depth; the mean pixel is (3.5, 3.5)
    d, fx, fy, cx, cy = 2.0, 8.0, 8.0, 4.0, 4.0
    angle = 0.3
    pose = np.eye(4)
    pose[:3, :3] = [[np.cos(angle), 0, np.sin(angle)], [0, 1, 0], [-np.sin(angle), 0, np.cos(angle)]]
    pose[:3, 3] = [0.5, -1.0, 0.25]
    cam = Camera(fx, fy, cx, cy, pose)
    cloud = project_frame(_depth_frame(np.full((8, 8), d), np.ones((8, 8)), cam), {"c": ObjectDecl("c", "cube", "cube", 1)})
    mean_cam = np.array([(3.5 - cx) * d / fx, (3.5 - cy) * d / fy, d])
    expected = pose[:3, :3] @ mean_cam + pose[:3, 3]
    np.testing.assert_allclose(cloud.objects["c"].centroid, expected, atol=1e-6)


def test_projection_errors():
    decl = {"k": ObjectDecl("k", "x", "x", 1)}
    with pytest.raises(MissingIntrinsics):
        project_frame(_depth_frame(np.ones((2, 2)), np.ones((2, 2)), None), decl)
    cam = Camera(1.0, 1.0, 0.0, 0.0, np.eye(4))
    with pytest.raises(ShapeMismatch):
        project_frame(_depth_frame(np.ones((2, 2)), np.ones((2, 3)), cam), decl)


def test_labeled_points_pass_through():
    pts = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    frame = Frame(Timestamp(3), FREE, {}, {"pot-1": pts})
    cloud = project_frame(frame, {"pot-1": ObjectDecl("pot-1", "pot", "pot", 1)})
    np.testing.assert_array_equal(cloud.objects["pot-1"].points, pts)
    assert cloud.t == Timestamp(3)


def test_object_instance_requires_points():
    with pytest.raises(ValueError):
        _obj("x", np.zeros((0, 3)))


def test_decide_examples():
    pot = np.zeros((5, 3))
    assert decide(_cloud(), _cloud(pot=pot), FREE) == [AggregationDecision(ADD, "pot")]
    assert decide(_cloud(pot=pot), _cloud(pot=pot + [0.02, 0, 0]), FREE) == [AggregationDecision(UPDATE, "pot")]
    assert decide(_cloud(pot=pot), _cloud(pot=pot + [0.2, 0, 0]), FREE) == [AggregationDecision(REPLACE, "pot")]
    held = RobotState(False, "pot", 0, "executing")
    assert decide(_cloud(pot=pot), _cloud(), held) == [AggregationDecision(DELETE, "pot")]
    assert decide(_cloud(pot=pot), _cloud(), FREE) == []


def test_decide_threshold_is_inclusive():
    pot = np.zeros((1, 3))
    cfg = AggregationConfig(replace_threshold_d=0.25)
    assert decide(_cloud(pot=pot), _cloud(pot=pot + [0.25, 0, 0]), FREE, cfg)[0].op == UPDATE
    assert decide(_cloud(pot=pot), _cloud(pot=pot + [0.2501, 0, 0]), FREE, cfg)[0].op == REPLACE


def test_apply_update_concatenates():
    prev = _cloud(0, pot=np.zeros((10, 3)))
    curr = _cloud(1, pot=np.full((5, 3), 0.01))
    out = apply(prev, curr, [AggregationDecision(UPDATE, "pot")])
    assert len(out.objects["pot"]) == 15
    np.testing.assert_allclose(out.objects["pot"].centroid, [0.01 / 3] * 3)
    assert out.t == Timestamp(1)


def test_apply_replace_resets():
    prev = _cloud(0, pot=np.zeros((10, 3)))
    curr = _cloud(1, pot=np.ones((5, 3)))
    out = apply(prev, curr, [AggregationDecision(REPLACE, "pot")])
    assert len(out.objects["pot"]) == 5
    assert out.objects["pot"].first_seen == Timestamp(0)


def test_apply_unknown_target():
    with pytest.raises(UnknownDecisionTarget):
        apply(_cloud(), _cloud(), [AggregationDecision(UPDATE, "pot")])
    with pytest.raises(UnknownDecisionTarget):
        apply(_cloud(), _cloud(), [AggregationDecision(DELETE, "pot")])


def test_update_downsamples_to_cap_deterministically():
    cfg = AggregationConfig(downsample_cap=12, rng_seed=3)
    prev = _cloud(0, pot=np.random.default_rng(0).normal(size=(10, 3)) * 0.01)
    curr = _cloud(1, pot=np.random.default_rng(1).normal(size=(10, 3)) * 0.01)
    a = apply(prev, curr, [AggregationDecision(UPDATE, "pot")], cfg)
    b = apply(prev, curr, [AggregationDecision(UPDATE, "pot")], cfg)
    assert len(a.objects["pot"]) == 12
    np.testing.assert_array_equal(a.objects["pot"].points, b.objects["pot"].points)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decide_is_total_and_matches_rule_oracle(seed):
    prev, curr, robot = random_triple(np.random.default_rng(seed))
    decisions = decide(prev, curr, robot)
    ids = [d.object_id for d in decisions]
    assert len(ids) == len(set(ids))
    assert set(ids) <= set(prev.objects) | set(curr.objects)
    expected = rule_decide(
        {k: v.centroid for k, v in prev.objects.items()},
        {k: v.centroid for k, v in curr.objects.items()},
        robot.held_object,
        AggregationConfig().replace_threshold_d,
    )
    assert decision_ops(decisions, prev, curr) == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_invariants(seed):
    prev, curr, robot = random_triple(np.random.default_rng(seed))
    decisions = decide(prev, curr, robot)
    check_apply(prev, curr, decisions, apply(prev, curr, decisions))


def test_same_frame_twice_keeps_object_set():
    frame = _cloud(0, pot=np.zeros((4, 3)), sink=np.ones((3, 3)))
    once = apply(SemanticPointCloud(), frame, decide(SemanticPointCloud(), frame, FREE))
    twice = apply(once, frame, decide(once, frame, FREE))
    assert set(once.objects) == set(twice.objects)
    assert len(twice.objects["pot"]) == 2 * len(once.objects["pot"])


@pytest.mark.parametrize("name", ["boil_water_success", "toast_bread_success", "boil_water_wrong_burner"])
def test_trajectory_keeps_every_seen_object(name):
    slog, world, _ = run_scenario(name)
    seen = set()
    acc = None
    for frame, _, acc in aggregate(slog):
        seen |= set(frame.labeled_points)
    held_at_end = slog.frames[-1].robot.held_object
    expected = (set(world.present()) & seen) - {held_at_end}
    assert expected <= set(acc.objects)
