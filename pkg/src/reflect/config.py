"""Pipeline configuration, loadable from a ``key=value`` text file.

Blank lines and ``#`` comments are ignored. Unknown keys are an error so
typos do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class AggregationConfig:
    replace_threshold_d: float = 0.10  # meters, centroid displacement
    downsample_cap: int = 20_000  # max points kept per object
    rng_seed: int = 0


@dataclass(frozen=True)
class RelationConfig:
    contact_max: float = 0.05
    far_max: float = 0.40
    inside_frac: float = 0.50
    ontop_xy_frac: float = 0.70
    ontop_above_frac: float = 0.70
    vert_component: float = 0.9
    horiz_component: float = 0.8
    occl_depth_frac: float = 0.90
    occl_overlap_frac: float = 0.25
    near_max: float = 0.10
    # False: the closer object is the *object* of "occluding"; True swaps the roles.
    swap_occlusion: bool = False

    def __post_init__(self):
        for name in ("inside_frac", "ontop_xy_frac", "ontop_above_frac", "vert_component",
                     "horiz_component", "occl_depth_frac", "occl_overlap_frac"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if not self.contact_max < self.near_max < self.far_max:
            raise ValueError("need contact_max < near_max < far_max")


@dataclass(frozen=True)
class AudioConfig:
    epsilon: float = 0.02  # windowed-RMS threshold on normalized amplitude
    window: float = 0.050  # seconds
    hop: float = 0.025
    min_len: float = 0.2


@dataclass(frozen=True)
class Config:
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    relations: RelationConfig = field(default_factory=RelationConfig)
    audio: AudioConfig = field(default_factory=AudioConfig)
    grounding_threshold: float = 0.5


def _coerce(raw: str, like):
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return type(like)(raw.strip())


def parse_config(text: str) -> Config:
    sections = {
        "aggregation": AggregationConfig(),
        "relations": RelationConfig(),
        "audio": AudioConfig(),
    }
    owners = {f.name: sec for sec, obj in sections.items() for f in fields(obj)}
    top: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value")
        if key == "grounding_threshold":
            top[key] = float(value)
            continue
        # audio keys may be written with an audio_ prefix (audio_epsilon=...)
        if key.startswith("audio_") and key[6:] in owners and owners[key[6:]] == "audio":
            key = key[6:]
        if key not in owners:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        sec = owners[key]
        obj = sections[sec]
        sections[sec] = replace(obj, **{key: _coerce(value, getattr(obj, key))})
    return Config(sections["aggregation"], sections["relations"], sections["audio"], **top)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text(encoding="utf-8"))
