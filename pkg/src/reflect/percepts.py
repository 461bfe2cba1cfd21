"""Embedding-based labeling of audio clips and object states.

Classification is an argmax of cosine similarity between a query embedding
and candidate label embeddings. Embeddings come from an
``EmbeddingProvider``; two are shipped: a file-backed store of precomputed
vectors and a deterministic lexical hashing embedder (used for action
grounding and for building stores offline).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .config import AudioConfig
from .log_model import AudioEvent, Timestamp


class DimensionMismatch(ValueError):
    pass


class EmptySignal(ValueError):
    pass


def normalize(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


class EmbeddingProvider(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class LabelSet:
    labels: tuple[str, ...]
    matrix: np.ndarray  # (L, D) unit rows

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if not self.labels or m.shape[0] != len(self.labels):
            raise ValueError("label set must be non-empty with one embedding per label")
        object.__setattr__(self, "matrix", m / np.linalg.norm(m, axis=1, keepdims=True))

    @classmethod
    def from_provider(cls, labels: Iterable[str], provider: EmbeddingProvider) -> "LabelSet":
        labels = tuple(labels)
        return cls(labels, np.stack([provider.embed_text(t) for t in labels]))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def classify(e, labels: LabelSet) -> tuple[str, float]:
    """Highest cosine-similarity label; ties go to the lowest index."""
    v = np.asarray(e, dtype=float).ravel()
    if v.shape[0] != labels.dim:
        raise DimensionMismatch(f"embedding has {v.shape[0]} dims, labels have {labels.dim}")
    scores = labels.matrix @ normalize(v)
    i = int(np.argmax(scores))  # first maximum wins
    return labels.labels[i], float(np.clip(scores[i], -1.0, 1.0))


def classify_object_state(image_feature, state_labels: LabelSet) -> str:
    return classify(image_feature, state_labels)[0]


def segment_audio(
    samples,
    rate: float,
    epsilon: float = AudioConfig.epsilon,
    min_len: float = AudioConfig.min_len,
    window: float = AudioConfig.window,
    hop: float = AudioConfig.hop,
) -> list[tuple[float, float]]:
    """Maximal runs where windowed RMS >= epsilon, in seconds, shorter runs dropped."""
    x = np.asarray(samples, dtype=float).ravel()
    if rate <= 0:
        raise ValueError("rate must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if x.size == 0:
        raise EmptySignal("no samples")
    duration = x.size / rate
    win = max(1, int(round(window * rate)))
    step = max(1, int(round(hop * rate)))
    starts = np.arange(0, x.size, step)
    # cumulative sum of squares gives every window's energy in O(n)
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    ends = np.minimum(starts + win, x.size)
    rms = np.sqrt((csum[ends] - csum[starts]) / (ends - starts))
    active = rms >= epsilon

    segments = []
    i = 0
    while i < len(active):
        if not active[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(active) and active[j + 1]:
            j += 1
        # a silent neighbouring window proves there was no sound where it lies,
        # so the run is trimmed to the gap between its silent neighbours
        lo = max(starts[i], ends[i - 1]) if i > 0 else starts[i]
        hi = min(ends[j], starts[j + 1]) if j + 1 < len(active) else ends[j]
        seg = (lo / rate, min(hi / rate, duration))
        if seg[1] - seg[0] >= min_len:
            segments.append(seg)
        i = j + 1
    return segments


def summarize_audio(
    events: Sequence[AudioEvent],
    labels: LabelSet | None = None,
    provider: EmbeddingProvider | None = None,
) -> list[tuple[Timestamp, Timestamp, str]]:
    """Labeled events pass through; embedded ones are classified against ``labels``."""
    out = []
    for ev in events:
        if ev.label is not None:
            out.append((ev.start, ev.end, ev.label))
        else:
            if labels is None:
                raise ValueError("embedded audio event needs a label set")
            out.append((ev.start, ev.end, classify(ev.embedding, labels)[0]))
    out.sort(key=lambda r: (r[0], r[1], r[2]))
    return out


# ---------------------------------------------------------------------------
# providers

_ORDINALS = {
    "first": "1", "second": "2", "third": "3", "fourth": "4", "fifth": "5",
    "sixth": "6", "seventh": "7", "eighth": "8", "ninth": "9", "tenth": "10",
}
_PHRASES = [
    (r"\bturn(?:ed)? on\b", "toggle on"),
    (r"\bturn(?:ed)? off\b", "toggle off"),
    (r"\bswitch(?:ed)? on\b", "toggle on"),
    (r"\bswitch(?:ed)? off\b", "toggle off"),
    (r"\bpick(?:ed)? up\b", "pick up"),
    (r"\bplace(?:d)? on\b", "put on"),
    (r"\bplace(?:d)? in(?:to|side)?\b", "put in"),
    (r"\bput (\w+(?: \w+)?) (?:onto|on top of|on)\b", r"put on \1"),
    (r"\bput (\w+(?: \w+)?) (?:into|inside|in)\b", r"put in \1"),
    (r"\bgrab\b|\bgrasp\b|\btake\b", "pick up"),
    (r"\bshut\b", "close"),
    (r"\bcut\b", "slice"),
    (r"\bbreak\b", "crack"),
]
_STOPWORDS = {"the", "a", "an", "to", "of", "and", "then", "robot", "please", "it", "with", "from"}


def lexical_tokens(text: str) -> list[str]:
    t = text.lower().replace("_", " ")
    t = re.sub(r"[()\[\],.;:!?\"']", " ", t)
    t = re.sub(r"-(\d+)\b", r" \1", t)
    for word, digit in _ORDINALS.items():
        t = re.sub(rf"\b{word}\b", digit, t)
    for pat, rep in _PHRASES:
        t = re.sub(pat, rep, t)
    return [w for w in t.split() if w not in _STOPWORDS]


class LexicalProvider:
    """Deterministic hashed bag of words plus character trigrams.

    Not a learned model: it normalizes verbs ("turn on" -> "toggle on"),
    ordinals ("fourth" -> "4") and compound spellings ("stoveburner" vs
    "stove burner", via trigrams over the joined text), which is what action
    grounding against ``verb (object-id)`` templates needs.
    """

    def __init__(self, dim: int = 512, trigram_weight: float = 0.5):
        self.dim = dim
        self.trigram_weight = trigram_weight

    def _slot(self, feature: str) -> tuple[int, float]:
        h = hashlib.blake2b(feature.encode(), digest_size=8).digest()
        idx = int.from_bytes(h[:4], "little") % self.dim
        sign = 1.0 if h[4] & 1 else -1.0
        return idx, sign

    def embed_text(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        tokens = lexical_tokens(text)
        for tok in tokens:
            i, s = self._slot("w:" + tok)
            v[i] += s
        joined = "".join(tokens)
        for k in range(len(joined) - 2):
            i, s = self._slot("c:" + joined[k : k + 3])
            v[i] += s * self.trigram_weight
        if not v.any():
            i, s = self._slot("empty")
            v[i] = s
        return normalize(v)


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:24]


class FileEmbeddingProvider:
    """Read-only store: ``index.json`` maps key -> ``vec/<key>.bin`` (float32 LE).

    Keys are ``text_key(text)`` for text embeddings; clip embeddings use any
    caller-chosen key (e.g. a content hash of the samples).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        index_path = self.root / "index.json"
        if not index_path.is_file():
            index_path = self.root / "embeddings" / "index.json"
            self.root = index_path.parent
        self.index: dict[str, str] = json.loads(index_path.read_text(encoding="utf-8"))
        self._cache: dict[str, np.ndarray] = {}
        first = next(iter(self.index), None)
        self.dim = len(self.lookup(first)) if first is not None else 0

    def lookup(self, key: str) -> np.ndarray:
        if key not in self._cache:
            rel = self.index[key]
            self._cache[key] = normalize(np.frombuffer((self.root / rel).read_bytes(), dtype="<f4"))
        return self._cache[key]

    def embed_text(self, text: str) -> np.ndarray:
        try:
            return self.lookup(text_key(text))
        except KeyError:
            raise KeyError(f"no stored embedding for text {text!r}") from None

    def embed_audio_clip(self, key: str) -> np.ndarray:
        return self.lookup(key)

    @staticmethod
    def write(root: str | Path, vectors: dict[str, np.ndarray]) -> Path:
        """Create a store from ``{key: vector}``; returns the store directory."""
        root = Path(root)
        (root / "vec").mkdir(parents=True, exist_ok=True)
        index = {}
        for key, vec in vectors.items():
            rel = f"vec/{key}.bin"
            (root / rel).write_bytes(np.asarray(vec, dtype="<f4").tobytes())
            index[key] = rel
        (root / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return root

    @classmethod
    def build_from_texts(cls, root: str | Path, texts: Iterable[str], embedder: EmbeddingProvider) -> "FileEmbeddingProvider":
        cls.write(root, {text_key(t): embedder.embed_text(t) for t in texts})
        return cls(root)
