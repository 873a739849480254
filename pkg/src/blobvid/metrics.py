"""Layout-control metrics: box IOU matching and region embedding similarities.

Detections are truncated to the ground-truth count by confidence, then matched
one-to-one to maximize total IOU. The mean IOU pools matched scores over the
evaluation frames. Region similarity metrics average cosines over matched
(object, frame) embedding pairs; a missing counterpart skips the pair and is
counted, never raised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .embedding import read_embedding
from .errors import DegenerateVector, RangeError, ShapeError, UndefinedMetric

__all__ = [
    "BBox",
    "FrameEval",
    "MatchResult",
    "RegionEmbedding",
    "MetricReport",
    "bbox_iou",
    "match_detections",
    "mean_iou",
    "region_cosine_metrics",
    "load_frame_evals",
    "load_region_embeddings",
]

COSINE_MODES = ("rclip_t", "rclip_i", "rcfc")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with corners (x0, y0) < (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float
    confidence: float = 1.0

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise RangeError(f"box corners must be ordered, got {(self.x0, self.y0, self.x1, self.y1)}")
        if not (0.0 <= self.confidence <= 1.0):
            raise RangeError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def bbox_iou(a: BBox, b: BBox) -> float:
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class FrameEval:
    """Everything needed to score one frame: detections and labeled ground truth."""

    frame: int
    detections: tuple[BBox, ...]
    ground_truth: tuple[tuple[int, BBox], ...]


@dataclass(frozen=True)
class MatchResult:
    """pairs maps (original detection index, ground truth index); per_gt_iou has
    one score per ground-truth box, zero when unmatched."""

    pairs: tuple[tuple[int, int], ...]
    per_gt_iou: tuple[float, ...]
    kept: tuple[int, ...]


def _truncate_by_confidence(dets: Sequence[BBox], n: int) -> list[int]:
    # Stable sort: ties keep input order.
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    return order[:n]


def match_detections(dets: Sequence[BBox], gts: Sequence[BBox],
                     method: str = "hungarian") -> MatchResult:
    """One-to-one assignment of detections to ground truth maximizing total IOU.

    Detections beyond the ground-truth count are dropped by descending
    confidence first. method "greedy" repeatedly takes the best remaining pair
    instead; it exists for comparison and is not optimal.
    """
    if method not in ("hungarian", "greedy"):
        raise RangeError(f"unknown matching method {method!r}")
    if not gts:
        return MatchResult(pairs=(), per_gt_iou=(), kept=())
    kept = _truncate_by_confidence(dets, len(gts))
    if not kept:
        return MatchResult(pairs=(), per_gt_iou=(0.0,) * len(gts), kept=())
    iou = np.array([[bbox_iou(dets[i], g) for g in gts] for i in kept])
    per_gt = [0.0] * len(gts)
    pairs = []
    if method == "hungarian":
        rows, cols = linear_sum_assignment(-iou)
        for r, c in zip(rows.tolist(), cols.tolist()):
            pairs.append((kept[r], c))
            per_gt[c] = float(iou[r, c])
    else:
        free_rows = set(range(len(kept)))
        free_cols = set(range(len(gts)))
        while free_rows and free_cols:
            best = max(
                ((iou[r, c], -r, -c) for r in free_rows for c in free_cols)
            )
            _, nr, nc = best
            r, c = -nr, -nc
            free_rows.remove(r)
            free_cols.remove(c)
            pairs.append((kept[r], c))
            per_gt[c] = float(iou[r, c])
    pairs.sort(key=lambda rc: rc[1])
    return MatchResult(pairs=tuple(pairs), per_gt_iou=tuple(per_gt), kept=tuple(kept))


def mean_iou(evals: Iterable[FrameEval], eval_frames: Iterable[int],
             method: str = "hungarian") -> float:
    """Pool matched IOUs of every ground-truth box over the evaluation frames."""
    frames = set(eval_frames)
    if not frames:
        raise RangeError("eval_frames must be non-empty")
    scores: list[float] = []
    for ev in evals:
        if ev.frame not in frames:
            continue
        gts = [g for _, g in ev.ground_truth]
        if not gts:
            continue
        result = match_detections(ev.detections, gts, method=method)
        scores.extend(result.per_gt_iou)
    if not scores:
        raise UndefinedMetric("no ground-truth objects on the evaluation frames")
    return float(np.mean(scores))


@dataclass(frozen=True)
class RegionEmbedding:
    """One region feature vector tagged by object, frame, and kind
    ("generated", "ground_truth", or "caption")."""

    object_id: int
    frame: int
    kind: str
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float64, copy=True).reshape(-1)
        if vec.size == 0 or not np.all(np.isfinite(vec)):
            raise ShapeError(f"embedding vector must be finite and non-empty, got size {vec.size}")
        if float(np.linalg.norm(vec)) == 0.0:
            raise DegenerateVector(f"object {self.object_id} frame {self.frame}: zero-norm vector")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class MetricReport:
    metric: str
    value: float
    num_pairs: int
    skipped: int
    averaging: str = "pooled"

    def to_json(self) -> str:
        return json.dumps(
            {
                "metric": self.metric,
                "value": self.value,
                "num_pairs": self.num_pairs,
                "skipped": self.skipped,
                "averaging": self.averaging,
            }
        )


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def region_cosine_metrics(embs: Iterable[RegionEmbedding], mode: str) -> MetricReport:
    """Cosine similarity metrics over region embeddings.

    rclip_t: caption vs generated at the same (object, frame).
    rclip_i: ground truth vs generated at the same (object, frame).
    rcfc:    generated at (object, t) vs (object, t+1), consecutive frames only.
    """
    if mode not in COSINE_MODES:
        raise RangeError(f"unknown mode {mode!r}, expected one of {COSINE_MODES}")
    by_kind: dict[str, dict[tuple[int, int], RegionEmbedding]] = {}
    for e in embs:
        slot = by_kind.setdefault(e.kind, {})
        key = (e.object_id, e.frame)
        if key in slot:
            raise ShapeError(f"duplicate {e.kind} embedding for object {key[0]} frame {key[1]}")
        slot[key] = e
    generated = by_kind.get("generated", {})
    cosines: list[float] = []
    skipped = 0
    if mode in ("rclip_t", "rclip_i"):
        reference = by_kind.get("caption" if mode == "rclip_t" else "ground_truth", {})
        for key, ref in sorted(reference.items()):
            gen = generated.get(key)
            if gen is None:
                skipped += 1
                continue
            cosines.append(_cosine(ref.vector, gen.vector))
    else:
        by_object: dict[int, list[int]] = {}
        for obj, frame in generated:
            by_object.setdefault(obj, []).append(frame)
        for obj in sorted(by_object):
            frames = sorted(by_object[obj])
            for t in range(frames[0], frames[-1]):
                first = generated.get((obj, t))
                second = generated.get((obj, t + 1))
                if first is None or second is None:
                    skipped += 1
                    continue
                cosines.append(_cosine(first.vector, second.vector))
    if not cosines:
        raise UndefinedMetric(f"no scorable pairs for {mode} ({skipped} skipped)")
    return MetricReport(
        metric=mode,
        value=float(np.mean(cosines)),
        num_pairs=len(cosines),
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# File loaders for the CLI


def load_frame_evals(detections_path, ground_truth_path) -> list[FrameEval]:
    """Join detection and ground-truth JSON files on frame index."""
    det_doc = json.loads(Path(detections_path).read_text(encoding="utf-8"))
    gt_doc = json.loads(Path(ground_truth_path).read_text(encoding="utf-8"))
    dets_by_frame: dict[int, list[BBox]] = {}
    for fr in det_doc.get("frames", []):
        dets_by_frame[int(fr["frame"])] = [
            BBox(*d["bbox"], confidence=d.get("confidence", 1.0)) for d in fr.get("detections", [])
        ]
    gts_by_frame: dict[int, list[tuple[int, BBox]]] = {}
    for fr in gt_doc.get("frames", []):
        gts_by_frame[int(fr["frame"])] = [
            (int(o["id"]), BBox(*o["bbox"])) for o in fr.get("objects", [])
        ]
    frames = sorted(set(dets_by_frame) | set(gts_by_frame))
    return [
        FrameEval(
            frame=t,
            detections=tuple(dets_by_frame.get(t, [])),
            ground_truth=tuple(gts_by_frame.get(t, [])),
        )
        for t in frames
    ]


def load_region_embeddings(manifest_path) -> list[RegionEmbedding]:
    """Read region embeddings listed in a manifest JSON.

    Each entry holds object, frame, kind, and a path (relative to the manifest)
    to a binary embedding file with its JSON sidecar.
    """
    manifest_file = Path(manifest_path)
    doc = json.loads(manifest_file.read_text(encoding="utf-8"))
    out = []
    for entry in doc.get("embeddings", []):
        data = read_embedding(manifest_file.parent / entry["path"])
        out.append(
            RegionEmbedding(
                object_id=int(entry["object"]),
                frame=int(entry["frame"]),
                kind=entry["kind"],
                vector=data.reshape(-1),
            )
        )
    return out
