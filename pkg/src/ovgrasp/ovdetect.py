"""Open-vocabulary detection, mocked for hardware-free runs.

Real deployments embed image regions and text prompts with a pretrained
two-tower model and score region-prompt pairs. Here both sides are
replaced by deterministic pseudo-embeddings derived from labels, so the
scoring, thresholding, vocabulary handling, and tracking behave exactly
like the real pipeline while staying reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

EMBED_DIM = 32

VALID_SPLITS = ("seen", "unseen")


class DetectError(ValueError):
    pass


class ZeroVector(DetectError):
    """An embedding with zero norm cannot be scored."""


class DimensionMismatch(DetectError):
    pass


class EmptyVocabulary(DetectError):
    pass


def embedding_for_label(label: str, seed: int, dim: int = EMBED_DIM) -> np.ndarray:
    """Deterministic unit embedding for a text label.

    The vector depends only on (seed, label), never on what else is in
    the vocabulary, so the same object scores identically under any
    vocabulary composition.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    v = rng.standard_normal(dim)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroVector(f"degenerate embedding for {label!r}")
    return v / n


@dataclass(frozen=True)
class SimilarityParams:
    """Affine calibration applied on top of cosine similarity."""

    alpha: float = 1.0
    beta: float = 0.0


def similarity(region: np.ndarray, prompt: np.ndarray,
               params: SimilarityParams = SimilarityParams()) -> float:
    """Scaled cosine similarity between a region and a prompt embedding."""
    r = np.asarray(region, dtype=np.float64)
    p = np.asarray(prompt, dtype=np.float64)
    if r.shape != p.shape or r.ndim != 1:
        raise DimensionMismatch(f"shapes {r.shape} and {p.shape}")
    rn = float(np.linalg.norm(r))
    pn = float(np.linalg.norm(p))
    if rn == 0.0 or pn == 0.0:
        raise ZeroVector("cannot normalize a zero embedding")
    return params.alpha * float(np.dot(r / rn, p / pn)) + params.beta


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class Vocabulary:
    """Text prompts with their seen/unseen tags and prompt embeddings."""

    labels: list[str]
    splits: list[str]
    embeddings: np.ndarray  # (N, EMBED_DIM), unit rows
    params: SimilarityParams
    seed: int

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.splits):
            raise DetectError("labels and splits must be parallel")
        if len(set(self.labels)) != len(self.labels):
            raise DetectError("duplicate labels in vocabulary")
        for s in self.splits:
            if s not in VALID_SPLITS:
                raise DetectError(f"bad split {s!r}")
        if self.embeddings.shape[0] != len(self.labels):
            raise DetectError("one embedding row per label required")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def split_of(self, label: str) -> str:
        return self.splits[self.index(label)]


def build_vocabulary(prompts: list[tuple[str, str]], alpha: float = 1.0,
                     beta: float = 0.0, seed: int = 0) -> Vocabulary:
    """Construct a vocabulary from (label, split) pairs."""
    if not prompts:
        raise EmptyVocabulary("vocabulary needs at least one prompt")
    labels = [p[0] for p in prompts]
    splits = [p[1] for p in prompts]
    emb = np.stack([embedding_for_label(lbl, seed) for lbl in labels])
    return Vocabulary(labels=labels, splits=splits, embeddings=emb,
                      params=SimilarityParams(alpha, beta), seed=seed)


def load_vocabulary(path) -> Vocabulary:
    """Load a vocabulary JSON file.

    Schema: {"prompts": [{"label": str, "split": "seen"|"unseen"}],
    "alpha": num, "beta": num, "seed": int}. Embeddings are derived
    from the seed, never stored.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        prompts = [(p["label"], p["split"]) for p in raw["prompts"]]
        alpha = float(raw["alpha"])
        beta = float(raw["beta"])
        seed = int(raw["seed"])
    except (KeyError, TypeError) as exc:
        raise DetectError(f"malformed vocabulary file {path}: {exc}") from exc
    return build_vocabulary(prompts, alpha, beta, seed)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    doc = {
        "prompts": [{"label": l, "split": s} for l, s in zip(vocab.labels, vocab.splits)],
        "alpha": vocab.params.alpha,
        "beta": vocab.params.beta,
        "seed": vocab.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def classify_region(region: np.ndarray, vocab: Vocabulary,
                    params: SimilarityParams | None = None) -> tuple[str, float]:
    """Best-matching label and its sigmoid-calibrated score.

    Ties go to the earliest label in the vocabulary. params defaults to
    the calibration stored in the vocabulary.
    """
    if len(vocab) == 0:
        raise EmptyVocabulary("cannot classify against an empty vocabulary")
    p = vocab.params if params is None else params
    r = np.asarray(region, dtype=np.float64)
    rn = float(np.linalg.norm(r))
    if rn == 0.0:
        raise ZeroVector("cannot classify a zero embedding")
    if r.shape != (vocab.embeddings.shape[1],):
        raise DimensionMismatch(f"region shape {r.shape}")
    sims = p.alpha * (vocab.embeddings @ (r / rn)) + p.beta
    best = int(np.argmax(sims))  # argmax returns the first maximum
    return vocab.labels[best], _sigmoid(float(sims[best]))


@dataclass(frozen=True)
class Detection:
    """One classified region in one frame."""

    frame_id: int
    label: str
    score: float
    box: tuple[float, float, float, float]
    object_id: int = -1

    def center(self) -> tuple[float, float]:
        x1, y1, x2, y2 = self.box
        return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)


def _jitter_rng(noise_seed: int, frame_id: int, key: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{noise_seed}:{frame_id}:{key}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


def mock_detect(snapshot, vocab: Vocabulary, noise_seed: int, *,
                sigma: float = 0.0, score_threshold: float = 0.5) -> list[Detection]:
    """Detect a scene snapshot's visible objects against a vocabulary.

    Each visible object whose label is in the vocabulary is classified
    by its latent embedding; detections below score_threshold are
    dropped. With sigma > 0 every box corner coordinate gets Gaussian
    jitter from an RNG keyed on (noise_seed, frame id, object key), so
    the same object in the same frame jitters identically regardless of
    which other labels the vocabulary contains. Objects whose label is
    absent from the vocabulary produce nothing: an open-vocabulary stack
    can only find what it has a prompt for.

    Emitted object_id is -1; identity is assigned by IdTracker.
    """
    out: list[Detection] = []
    for obj in snapshot.objects:
        if obj.label not in vocab:
            continue
        label, score = classify_region(obj.latent, vocab)
        if score < score_threshold:
            continue
        x1, y1, x2, y2 = obj.box
        if sigma > 0.0:
            rng = _jitter_rng(noise_seed, snapshot.frame_id, obj.key)
            dx1, dy1, dx2, dy2 = rng.normal(0.0, sigma, size=4)
            x1, y1, x2, y2 = x1 + dx1, y1 + dy1, x2 + dx2, y2 + dy2
            if x2 <= x1 or y2 <= y1:  # jitter must not produce a degenerate box
                x1, y1, x2, y2 = obj.box
        out.append(Detection(frame_id=snapshot.frame_id, label=label,
                             score=score, box=(x1, y1, x2, y2)))
    return out


def track_ids(prev: list[Detection], cur: list[Detection],
              max_track_dist: float = 50.0, next_id: int = 0) -> tuple[list[Detection], int]:
    """Carry object ids from prev to cur by greedy nearest-center matching.

    Previous detections claim, in ascending id order, the nearest
    still-unclaimed current detection within max_track_dist pixels.
    Unclaimed current detections get fresh ids (next_id upward) in
    input order. Returns the re-identified detections and the next free
    id. Purely deterministic; no motion model.
    """
    centers = [d.center() for d in cur]
    claimed: dict[int, int] = {}  # current index -> carried id
    for p in sorted(prev, key=lambda d: d.object_id):
        px, py = p.center()
        best_i, best_d = -1, max_track_dist
        for i, (cx, cy) in enumerate(centers):
            if i in claimed:
                continue
            d = math.hypot(cx - px, cy - py)
            if d < best_d or (d == best_d and best_i == -1):
                best_i, best_d = i, d
        if best_i >= 0:
            claimed[best_i] = p.object_id
    out: list[Detection] = []
    for i, det in enumerate(cur):
        if i in claimed:
            oid = claimed[i]
        else:
            oid = next_id
            next_id += 1
        out.append(Detection(frame_id=det.frame_id, label=det.label,
                             score=det.score, box=det.box, object_id=oid))
    next_id = max(next_id, max((d.object_id for d in out), default=-1) + 1)
    return out, next_id


class IdTracker:
    """Session-held id state around track_ids; one instance per pipeline."""

    def __init__(self, max_track_dist: float = 50.0):
        self.max_track_dist = max_track_dist
        self._prev: list[Detection] = []
        self._next_id = 0

    def update(self, detections: list[Detection]) -> list[Detection]:
        out, self._next_id = track_ids(self._prev, detections,
                                       self.max_track_dist, self._next_id)
        self._prev = out
        return out

    def reset(self) -> None:
        self._prev = []
        self._next_id = 0


def detection_log_lines(detections: list[Detection]) -> list[str]:
    """Serialize detections as the JSONL detection-log format."""
    lines = []
    for d in detections:
        lines.append(json.dumps({
            "frame": d.frame_id,
            "label": d.label,
            "score": round(d.score, 6),
            "box": [round(c, 3) for c in d.box],
            "id": d.object_id,
        }, separators=(",", ":")))
    return lines


def read_detection_log(path) -> list[Detection]:
    dets: list[Detection] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
                dets.append(Detection(frame_id=int(raw["frame"]), label=raw["label"],
                                      score=float(raw["score"]),
                                      box=tuple(float(c) for c in raw["box"]),
                                      object_id=int(raw.get("id", -1))))
            except (KeyError, TypeError, ValueError) as exc:
                raise DetectError(f"{path}: bad detection on line {lineno}: {exc}") from exc
    return dets
