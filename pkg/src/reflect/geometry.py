"""Per-frame semantic point clouds and their temporal aggregation.

The accumulated cloud ``P_t`` is folded from the per-frame clouds ``p_t``
with four decisions (ADD, UPDATE, REPLACE, DELETE). Objects that are in
``P_{t-1}``, absent from ``p_t`` and not held by the robot are retained
unchanged, so occluded objects keep their last known geometry.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

from .config import AggregationConfig
from .log_model import Camera, Frame, ObjectDecl, RobotState, SensoryLog, Timestamp

ADD, UPDATE, REPLACE, DELETE = "ADD", "UPDATE", "REPLACE", "DELETE"


class MissingIntrinsics(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class UnknownDecisionTarget(KeyError):
    pass


@dataclass(eq=False)
class ObjectInstance:
    object_id: str
    class_name: str
    points: np.ndarray  # (N, 3) world frame, meters
    last_seen: Timestamp
    first_seen: Timestamp | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise ValueError(f"object {self.object_id!r} has no points")
        self.points = pts
        if self.first_seen is None:
            self.first_seen = self.last_seen

    @cached_property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @cached_property
    def bbox_center(self) -> np.ndarray:
        lo, hi = self.bbox
        return (lo + hi) / 2.0

    @cached_property
    def unique(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct points and their multiplicities.

        Accumulated clouds repeat points heavily (UPDATE concatenates); every
        fraction-based relation test weights distinct points by count, which
        is exact and much cheaper.
        """
        pts, counts = np.unique(self.points, axis=0, return_counts=True)
        return pts, counts

    @cached_property
    def fingerprint(self) -> bytes:
        pts, counts = self.unique
        h = hashlib.blake2b(digest_size=16)
        h.update(pts.tobytes())
        h.update(counts.astype(np.int64).tobytes())
        return h.digest()

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class SemanticPointCloud:
    objects: dict[str, ObjectInstance] = field(default_factory=dict)
    t: Timestamp = field(default_factory=lambda: Timestamp(0))

    def __contains__(self, object_id: str) -> bool:
        return object_id in self.objects

    def __len__(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class AggregationDecision:
    op: str
    object_id: str


def backproject(depth: np.ndarray, camera: Camera) -> np.ndarray:
    """Pinhole back-projection of an H x W depth map to world points (H, W, 3)."""
    h, w = depth.shape
    v, u = np.mgrid[0:h, 0:w]
    d = depth.astype(float)
    cam = np.stack([(u - camera.cx) * d / camera.fx, (v - camera.cy) * d / camera.fy, d], axis=-1)
    return cam @ camera.pose[:3, :3].T + camera.pose[:3, 3]


def project_frame(
    frame: Frame,
    objects: Mapping[str, ObjectDecl],
    camera: Camera | None = None,
) -> SemanticPointCloud:
    """Build ``p_t`` for one frame. Background (label 0) is dropped."""
    cloud = SemanticPointCloud(t=frame.t)
    if frame.labeled_points is not None:
        for oid, pts in frame.labeled_points.items():
            pts = np.asarray(pts, dtype=float).reshape(-1, 3)
            if len(pts):
                cloud.objects[oid] = ObjectInstance(oid, objects[oid].class_name, pts, frame.t)
        return cloud

    dv = frame.depth_view
    cam = dv.camera or camera
    if cam is None:
        raise MissingIntrinsics(f"frame {frame.t}: depth payload without camera intrinsics")
    if dv.depth.shape != dv.segmentation.shape:
        raise ShapeMismatch(f"depth {dv.depth.shape} vs segmentation {dv.segmentation.shape}")
    world = backproject(dv.depth, cam)
    by_label = {d.label: d for d in objects.values()}
    valid = (dv.depth > 0) & (dv.segmentation != 0)
    labels = dv.segmentation[valid]
    pts = world[valid]
    for label in np.unique(labels):
        decl = by_label[int(label)]
        cloud.objects[decl.object_id] = ObjectInstance(decl.object_id, decl.class_name, pts[labels == label], frame.t)
    return cloud


def decide(
    prev: SemanticPointCloud,
    curr: SemanticPointCloud,
    robot: RobotState,
    cfg: AggregationConfig = AggregationConfig(),
) -> list[AggregationDecision]:
    """One decision per object in ``curr`` or ``prev``; retained objects get none."""
    out = []
    for oid, obj in curr.objects.items():
        old = prev.objects.get(oid)
        if old is None:
            out.append(AggregationDecision(ADD, oid))
        elif np.linalg.norm(obj.centroid - old.centroid) <= cfg.replace_threshold_d:
            out.append(AggregationDecision(UPDATE, oid))
        else:
            out.append(AggregationDecision(REPLACE, oid))
    for oid in prev.objects:
        if oid not in curr.objects and robot.held_object == oid:
            out.append(AggregationDecision(DELETE, oid))
    return out


def _downsample(points: np.ndarray, cap: int, seed: int, t: Timestamp, oid: str) -> np.ndarray:
    if len(points) <= cap:
        return points
    rng = np.random.default_rng([seed, t.seconds, zlib.crc32(oid.encode())])
    keep = np.sort(rng.choice(len(points), size=cap, replace=False))
    return points[keep]


def apply(
    prev: SemanticPointCloud,
    curr: SemanticPointCloud,
    decisions: Iterable[AggregationDecision],
    cfg: AggregationConfig = AggregationConfig(),
) -> SemanticPointCloud:
    objects = dict(prev.objects)
    for dec in decisions:
        oid = dec.object_id
        if dec.op == ADD:
            if oid not in curr.objects:
                raise UnknownDecisionTarget(oid)
            new = curr.objects[oid]
            objects[oid] = ObjectInstance(oid, new.class_name, new.points, curr.t, new.first_seen)
        elif dec.op == UPDATE:
            if oid not in curr.objects or oid not in prev.objects:
                raise UnknownDecisionTarget(oid)
            old, new = prev.objects[oid], curr.objects[oid]
            pts = _downsample(np.concatenate([old.points, new.points]), cfg.downsample_cap, cfg.rng_seed, curr.t, oid)
            objects[oid] = ObjectInstance(oid, old.class_name, pts, curr.t, old.first_seen)
        elif dec.op == REPLACE:
            if oid not in curr.objects or oid not in prev.objects:
                raise UnknownDecisionTarget(oid)
            old, new = prev.objects[oid], curr.objects[oid]
            objects[oid] = ObjectInstance(oid, new.class_name, new.points, curr.t, old.first_seen)
        elif dec.op == DELETE:
            if oid not in prev.objects:
                raise UnknownDecisionTarget(oid)
            del objects[oid]
        else:
            raise ValueError(f"unknown aggregation op {dec.op!r}")
    return SemanticPointCloud(objects, curr.t)


def aggregate(
    slog: SensoryLog,
    cfg: AggregationConfig = AggregationConfig(),
) -> Iterator[tuple[Frame, SemanticPointCloud, SemanticPointCloud]]:
    """Fold a log into accumulated clouds; yields ``(frame, p_t, P_t)``."""
    acc = SemanticPointCloud()
    for frame in slog.frames:
        curr = project_frame(frame, slog.objects, slog.camera_for(frame))
        acc = apply(acc, curr, decide(acc, curr, frame.robot, cfg), cfg)
        yield frame, curr, acc
