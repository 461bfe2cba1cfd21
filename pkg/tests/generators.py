"""Random inputs shared by the module tests and the acceptance suite."""

from __future__ import annotations

from reflect.geometry import ObjectInstance, SemanticPointCloud
from reflect.log_model import RobotState, Timestamp

IDS = [f"obj-{i}" for i in range(20)]


def random_cloud(rng, ids, t: int, base: dict | None = None) -> SemanticPointCloud:
    objects = {}
    for oid in ids:
        n = int(rng.integers(1, 40))
        if base is not None and oid in base:
            # either a small jitter or a large jump relative to the previous centroid
            center = base[oid] + rng.normal(0, rng.choice([0.02, 0.3]), 3)
        else:
            center = rng.uniform(-2, 2, 3)
        pts = center + rng.normal(0, 0.05, (n, 3))
        objects[oid] = ObjectInstance(oid, oid.split("-")[0], pts, Timestamp(t))
    return SemanticPointCloud(objects, Timestamp(t))


def random_triple(rng, t: int = 1):
    """(prev, curr, robot) over up to 20 objects with overlapping id sets."""
    prev_ids = [i for i in IDS if rng.random() < 0.6]
    curr_ids = [i for i in IDS if rng.random() < 0.6]
    prev = random_cloud(rng, prev_ids, t - 1)
    curr = random_cloud(rng, curr_ids, t, {k: v.centroid for k, v in prev.objects.items()})
    held = None
    if rng.random() < 0.7:
        held = str(rng.choice(IDS))
    robot = RobotState(held is None, held, 0, "executing")
    return prev, curr, robot
