"""Spatial relations between object point clouds.

``relate(a, b)`` evaluates the heuristics in a fixed priority order and
returns at most one relation for the ordered pair:

* contact (min distance < contact_max): inside, then on_top_of;
* mid range (contact_max <= d < far_max): above/below, right_of/left_of
  from the camera-frame (Y-up) direction between bounding-box centers, then
  occluding, then near;
* farther apart: nothing.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .config import RelationConfig
from .geometry import ObjectInstance
from .log_model import Camera, RobotState

log = logging.getLogger(__name__)

RELATION_NAMES = (
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
LOCAL_RELATIONS = frozenset({"left_of", "right_of", "occluding"})
ROBOT = "robot"

_HULL_TOL = 1e-9


class DegenerateHull(ValueError):
    """Raised internally when a hull cannot be built; callers fall back to bbox containment."""


@dataclass(frozen=True, order=True)
class Relation:
    subject: str
    name: str
    object: str

    def __post_init__(self):
        if self.name not in RELATION_NAMES:
            raise ValueError(f"unknown relation {self.name!r}")
        if self.subject == self.object:
            raise ValueError("relation subject and object must differ")


def min_distance(a: ObjectInstance, b: ObjectInstance) -> float:
    pa, _ = a.unique
    pb, _ = b.unique
    if len(pa) > len(pb):
        pa, pb = pb, pa
    dist, _ = cKDTree(pb).query(pa, k=1)
    return float(dist.min())


_hull_cache: "OrderedDict[bytes, np.ndarray]" = OrderedDict()


def hull_equations(obj: ObjectInstance) -> np.ndarray:
    """Facet half-spaces ``n.x + c <= 0`` of the object's convex hull."""
    key = obj.fingerprint
    eq = _hull_cache.get(key)
    if eq is not None:
        _hull_cache.move_to_end(key)
        return eq
    pts, _ = obj.unique
    if len(pts) < 4 or np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9) < 3:
        raise DegenerateHull(f"{obj.object_id}: fewer than 4 non-coplanar points")
    try:
        eq = ConvexHull(pts).equations
    except QhullError as exc:
        raise DegenerateHull(str(exc)) from None
    _hull_cache[key] = eq
    if len(_hull_cache) > 4096:
        _hull_cache.popitem(last=False)
    return eq


def inside_fraction(a: ObjectInstance, b: ObjectInstance) -> float:
    """Count-weighted share of ``a``'s points inside ``b``'s convex hull."""
    pts, counts = a.unique
    try:
        eq = hull_equations(b)
        inside = np.all(pts @ eq[:, :3].T + eq[:, 3] <= _HULL_TOL, axis=1)
    except DegenerateHull:
        log.debug("degenerate hull for %s; using bbox containment", b.object_id)
        lo, hi = b.bbox
        inside = np.all((pts >= lo - _HULL_TOL) & (pts <= hi + _HULL_TOL), axis=1)
    return float(counts[inside].sum() / counts.sum())


def _on_top(a: ObjectInstance, b: ObjectInstance, cfg: RelationConfig) -> bool:
    pts, counts = a.unique
    lo, hi = b.bbox
    total = counts.sum()
    in_xy = np.all((pts[:, :2] >= lo[:2]) & (pts[:, :2] <= hi[:2]), axis=1)
    above = pts[:, 2] > hi[2]
    return counts[in_xy].sum() / total >= cfg.ontop_xy_frac and counts[above].sum() / total >= cfg.ontop_above_frac


def camera_direction(a: ObjectInstance, b: ObjectInstance, camera: Camera) -> np.ndarray | None:
    """Unit vector from b's bbox center to a's, in camera axes with Y up."""
    v = (a.bbox_center - b.bbox_center) @ camera.pose[:3, :3]
    v = np.array([v[0], -v[1], v[2]])
    n = np.linalg.norm(v)
    if n < 1e-12:
        return None
    return v / n


def _bbox2d(uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return uv.min(axis=0), uv.max(axis=0)


def _occludes(a: ObjectInstance, b: ObjectInstance, camera: Camera, cfg: RelationConfig) -> bool:
    """True when ``a`` lies in front of ``b`` and their image boxes overlap."""
    pa, ca = a.unique
    pb, _ = b.unique
    uva, za = camera.project(pa)
    uvb, zb = camera.project(pb)
    if ca[za < zb.min()].sum() / ca.sum() < cfg.occl_depth_frac:
        return False
    alo, ahi = _bbox2d(uva)
    blo, bhi = _bbox2d(uvb)
    area_a = float(np.prod(ahi - alo))
    if area_a <= 0:
        return False
    inter = np.clip(np.minimum(ahi, bhi) - np.maximum(alo, blo), 0, None)
    return float(np.prod(inter)) / area_a >= cfg.occl_overlap_frac


def relate(
    a: ObjectInstance,
    b: ObjectInstance,
    camera: Camera,
    cfg: RelationConfig = RelationConfig(),
) -> Relation | None:
    dist = min_distance(a, b)
    if dist < cfg.contact_max:
        if inside_fraction(a, b) >= cfg.inside_frac:
            return Relation(a.object_id, "inside", b.object_id)
        if _on_top(a, b, cfg):
            return Relation(a.object_id, "on_top_of", b.object_id)
        return None
    if dist >= cfg.far_max:
        return None

    u = camera_direction(a, b, camera)
    if u is not None:
        if u[1] > cfg.vert_component:
            return Relation(a.object_id, "above", b.object_id)
        if u[1] < -cfg.vert_component:
            return Relation(a.object_id, "below", b.object_id)
        if u[0] > cfg.horiz_component:
            return Relation(a.object_id, "right_of", b.object_id)
        if u[0] < -cfg.horiz_component:
            return Relation(a.object_id, "left_of", b.object_id)
    if _occludes(a, b, camera, cfg):
        # a is in front; by default b is reported as the occluder
        if cfg.swap_occlusion:
            return Relation(a.object_id, "occluding", b.object_id)
        return Relation(b.object_id, "occluding", a.object_id)
    if dist < cfg.near_max:
        return Relation(a.object_id, "near", b.object_id)
    return None


def robot_relation(robot: RobotState) -> Relation | None:
    if robot.held_object is None:
        return None
    return Relation(robot.held_object, "inside_robot_gripper", ROBOT)
