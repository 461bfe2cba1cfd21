"""Independent reference implementations used as test oracles.

Each function re-derives a rule with a different technique from the package
code: exhaustive scans instead of KD-trees, Delaunay tetrahedra instead of
hull facet planes, an explicit matrix inverse for camera axes, plain Python
loops instead of vectorized argmax.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import Delaunay, QhullError


def brute_min_distance(p: np.ndarray, q: np.ndarray) -> float:
    diff = p[:, None, :] - q[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2).min()))


def in_hull(points: np.ndarray, hull_points: np.ndarray) -> np.ndarray:
    """Membership via Delaunay tetrahedralization; flat hulls use the bbox."""
    try:
        tri = Delaunay(hull_points)
        return tri.find_simplex(points, tol=1e-9) >= 0
    except (QhullError, ValueError):
        lo, hi = hull_points.min(axis=0), hull_points.max(axis=0)
        return np.all((points >= lo - 1e-9) & (points <= hi + 1e-9), axis=1)


def world_to_camera(points: np.ndarray, pose: np.ndarray) -> np.ndarray:
    homo = np.c_[points, np.ones(len(points))]
    return (np.linalg.inv(pose) @ homo.T).T[:, :3]


def bbox_center(points: np.ndarray) -> np.ndarray:
    return (points.min(axis=0) + points.max(axis=0)) / 2


def pixel_box(points: np.ndarray, camera) -> tuple[np.ndarray, np.ndarray]:
    cam = world_to_camera(points, camera.pose)
    u = camera.fx * cam[:, 0] / cam[:, 2] + camera.cx
    v = camera.fy * cam[:, 1] / cam[:, 2] + camera.cy
    uv = np.c_[u, v]
    return uv.min(axis=0), uv.max(axis=0)


def overlap_share(a: np.ndarray, b: np.ndarray, camera) -> float:
    """Intersection area of the two image boxes over the area of a's box."""
    alo, ahi = pixel_box(a, camera)
    blo, bhi = pixel_box(b, camera)
    w = min(ahi[0], bhi[0]) - max(alo[0], blo[0])
    h = min(ahi[1], bhi[1]) - max(alo[1], blo[1])
    area = (ahi[0] - alo[0]) * (ahi[1] - alo[1])
    if w <= 0 or h <= 0 or area <= 0:
        return 0.0
    return w * h / area


def brute_relate(a_id, a, b_id, b, camera, cfg, swap=False):
    """Reference evaluator: returns (subject, name, object) or None."""
    d = brute_min_distance(a, b)
    n = len(a)
    if d < cfg.contact_max:
        if in_hull(a, b).sum() / n >= cfg.inside_frac:
            return (a_id, "inside", b_id)
        lo, hi = b.min(axis=0), b.max(axis=0)
        xy = sum(1 for p in a if lo[0] <= p[0] <= hi[0] and lo[1] <= p[1] <= hi[1])
        up = sum(1 for p in a if p[2] > hi[2])
        if xy / n >= cfg.ontop_xy_frac and up / n >= cfg.ontop_above_frac:
            return (a_id, "on_top_of", b_id)
        return None
    if d >= cfg.far_max:
        return None
    # direction in camera axes with Y flipped to point up
    rot_inv = np.linalg.inv(camera.pose)[:3, :3]
    v = rot_inv @ (bbox_center(a) - bbox_center(b))
    v[1] = -v[1]
    norm = math.sqrt(float(v @ v))
    if norm > 1e-12:
        u = v / norm
        if u[1] > cfg.vert_component:
            return (a_id, "above", b_id)
        if u[1] < -cfg.vert_component:
            return (a_id, "below", b_id)
        if u[0] > cfg.horiz_component:
            return (a_id, "right_of", b_id)
        if u[0] < -cfg.horiz_component:
            return (a_id, "left_of", b_id)
    za = world_to_camera(a, camera.pose)[:, 2]
    zb = world_to_camera(b, camera.pose)[:, 2]
    if (za < zb.min()).sum() / n >= cfg.occl_depth_frac and overlap_share(a, b, camera) >= cfg.occl_overlap_frac:
        return (a_id, "occluding", b_id) if swap else (b_id, "occluding", a_id)
    if d < cfg.near_max:
        return (a_id, "near", b_id)
    return None


def rule_decide(prev: dict, curr: dict, held: str | None, d: float) -> dict:
    """Aggregation rules on centroid maps; unobserved, unheld objects map to 'retain'."""
    out = {}
    for oid in sorted(set(prev) | set(curr)):
        if oid in curr and oid not in prev:
            out[oid] = "ADD"
        elif oid in curr:
            gap = math.dist(tuple(prev[oid]), tuple(curr[oid]))
            out[oid] = "UPDATE" if gap <= d else "REPLACE"
        elif held == oid:
            out[oid] = "DELETE"
        else:
            out[oid] = "retain"
    return out


def brute_argmax_cosine(e, rows) -> int:
    best, best_i = -math.inf, -1
    en = math.sqrt(sum(x * x for x in e))
    for i, r in enumerate(rows):
        rn = math.sqrt(sum(x * x for x in r))
        s = sum(x * y for x, y in zip(e, r)) / (en * rn)
        if s > best:
            best, best_i = s, i
    return best_i


def visual_items(caption: str) -> tuple[str, list[str], str]:
    """Split 'Visual observation: a, b, c. rest' into (head, items, rest)."""
    head, sep, tail = caption.partition("Visual observation: ")
    if not sep:
        return caption, [], ""
    # the visual list ends at the first '. ' that is not inside parentheses
    depth = 0
    for i, ch in enumerate(tail):
        depth += ch == "("
        depth -= ch == ")"
        if ch == "." and depth == 0 and (i + 1 == len(tail) or tail[i + 1] == " "):
            items, rest = tail[:i], tail[i + 1:]
            break
    else:
        items, rest = tail, ""
    return head + sep, [s.strip() for s in items.split(", ")], rest


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


PHRASES = {
    "is inside": "inside",
    "is on top of": "on_top_of",
    "is above": "above",
    "is below": "below",
    "is on the left of": "left_of",
    "is on the right of": "right_of",
    "is occluding": "occluding",
    "is near": "near",
}


def parse_caption(text: str) -> dict:
    """Parse a multi-line caption back into its parts."""
    lines = text.split("\n")
    head = lines[0]
    t, _, action = head.partition(". Action: ")
    out = {"t": t, "action": action[:-1], "visible": [], "relations": [], "held": None, "audio": []}
    vis = lines[1][len("Visual observation:"):].strip()
    if vis:
        out["visible"] = [s.strip() for s in vis[:-1].split(", ")]
    for line in lines[2:]:
        if line.startswith("Auditory observation: "):
            out["audio"] = line[len("Auditory observation: "):-1].split(", ")
        elif line.endswith(" is inside robot gripper."):
            name = line[: -len(" is inside robot gripper.")]
            out["held"] = None if name == "nothing" else name
        else:
            body = line[:-1]
            # longest phrase first so "is on the left of" wins over "is on"
            for phrase in sorted(PHRASES, key=len, reverse=True):
                subj, sep, obj = body.partition(f" {phrase} ")
                if sep:
                    out["relations"].append((subj, PHRASES[phrase], obj))
                    break
            else:
                raise ValueError(f"unparseable caption line {line!r}")
    return out


def decision_ops(decisions, prev, curr) -> dict:
    """{oid: op} over every id in either cloud; ids without a decision are retained."""
    got = {oid: "retain" for oid in set(prev.objects) | set(curr.objects)}
    for d in decisions:
        got[d.object_id] = d.op
    return got


def check_apply(prev, curr, decisions, out) -> None:
    """Assert the aggregation invariants on one apply step."""
    ops = decision_ops(decisions, prev, curr)
    assert out.t == curr.t
    for oid, op in ops.items():
        if op == "DELETE":
            assert oid not in out.objects
            continue
        obj = out.objects[oid]
        assert len(obj) > 0
        lo, hi = obj.bbox
        np.testing.assert_array_equal(lo, obj.points.min(axis=0))
        np.testing.assert_array_equal(hi, obj.points.max(axis=0))
        if op == "UPDATE":
            assert len(obj) == len(prev.objects[oid]) + len(curr.objects[oid])
        elif op in ("REPLACE", "ADD"):
            assert len(obj) == len(curr.objects[oid])
        else:
            assert obj is prev.objects[oid]
    assert set(out.objects) == {oid for oid, op in ops.items() if op != "DELETE"}
